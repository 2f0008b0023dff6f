#include "eids/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eids::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const char* what) {
    if (!ok) throw ShapeError(what);
}

void check_layer(const LstmLayerParams& p) {
    const std::size_t h = p.hidden_dim();
    require(h >= 1, "lstm layer needs at least one cell");
    require(p.w_input.rows() == 4 * h && p.w_input.cols() >= 1, "w_input must be 4h x in");
    require(p.w_recurrent.rows() == 4 * h && p.w_recurrent.cols() == h, "w_recurrent must be 4h x h");
    require(p.bias.size() == 4 * h, "bias must have 4h entries");
}

// Pre-activations z = b + W x + U h, summed left to right.
void gate_preactivations(const LstmLayerParams& p, std::span<const double> x, std::span<const double> h_prev,
                         std::span<double> z) {
    const std::size_t in = p.input_dim();
    const std::size_t h = p.hidden_dim();
    const double* w = p.w_input.data().data();
    const double* u = p.w_recurrent.data().data();
    for (std::size_t r = 0; r < 4 * h; ++r) {
        double acc = p.bias[r];
        for (std::size_t j = 0; j < in; ++j) acc += w[r * in + j] * x[j];
        for (std::size_t j = 0; j < h; ++j) acc += u[r * h + j] * h_prev[j];
        z[r] = acc;
    }
}

void activate(std::span<double> gates, std::size_t h) {
    for (std::size_t k = 0; k < h; ++k) {
        gates[k] = sigmoid(gates[k]);
        gates[h + k] = sigmoid(gates[h + k]);
        gates[2 * h + k] = std::tanh(gates[2 * h + k]);
        gates[3 * h + k] = sigmoid(gates[3 * h + k]);
    }
}

StepCache step(const LstmLayerParams& p, std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev) {
    const std::size_t h = p.hidden_dim();
    StepCache sc;
    sc.x.assign(x.begin(), x.end());
    sc.h_prev.assign(h_prev.begin(), h_prev.end());
    sc.c_prev.assign(c_prev.begin(), c_prev.end());
    sc.gates.assign(4 * h, 0.0);
    gate_preactivations(p, x, h_prev, sc.gates);
    activate(sc.gates, h);
    sc.cell.resize(h);
    sc.tanh_cell.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        sc.cell[k] = sc.gates[h + k] * c_prev[k] + sc.gates[k] * sc.gates[2 * h + k];
        sc.tanh_cell[k] = std::tanh(sc.cell[k]);
    }
    return sc;
}

std::vector<double> hidden_of(const StepCache& sc);

// Runs one layer from a zero state over a sequence of inputs.
std::vector<StepCache> run_layer(const LstmLayerParams& p, const std::vector<std::vector<double>>& inputs) {
    const std::size_t h = p.hidden_dim();
    std::vector<StepCache> caches;
    caches.reserve(inputs.size());
    std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0);
    for (const auto& x : inputs) {
        caches.push_back(step(p, x, h_prev, c_prev));
        h_prev = hidden_of(caches.back());
        c_prev = caches.back().cell;
    }
    return caches;
}

std::vector<double> hidden_of(const StepCache& sc) {
    const std::size_t h = sc.cell.size();
    std::vector<double> out(h);
    for (std::size_t k = 0; k < h; ++k) out[k] = sc.gates[3 * h + k] * sc.tanh_cell[k];
    return out;
}

std::vector<std::vector<double>> split_steps(const Sequence& xs) {
    std::vector<std::vector<double>> out;
    out.reserve(xs.steps());
    for (std::size_t t = 0; t < xs.steps(); ++t) {
        const auto s = xs.step(t);
        out.emplace_back(s.begin(), s.end());
    }
    return out;
}

void check_sequence(const Sequence& xs, const NetworkParams& params) {
    if (xs.dim == 0 || xs.values.empty()) throw ShapeError("empty input sequence");
    require(xs.values.size() % xs.dim == 0, "sequence values not a multiple of dim");
    require(xs.dim == params.input_dim(), "sequence dim does not match network input dim");
}

double readout(const ReadoutParams& r, std::span<const double> features) {
    double acc = r.bias;
    for (std::size_t k = 0; k < features.size(); ++k) acc += r.weights[k] * features[k];
    return acc;
}

// Reverse pass through one layer. d_hidden[t] is the external gradient on h_t
// (processing order); returns the gradient on each step's input.
std::vector<std::vector<double>> backward_layer(const LstmLayerParams& p, const std::vector<StepCache>& caches,
                                                const std::vector<std::vector<double>>& d_hidden,
                                                LstmLayerParams& grad) {
    const std::size_t h = p.hidden_dim();
    const std::size_t in = p.input_dim();
    const std::size_t steps = caches.size();
    const double* w = p.w_input.data().data();
    const double* u = p.w_recurrent.data().data();
    double* gw = grad.w_input.data().data();
    double* gu = grad.w_recurrent.data().data();

    std::vector<std::vector<double>> d_inputs(steps, std::vector<double>(in, 0.0));
    std::vector<double> dh_rec(h, 0.0), dc_rec(h, 0.0), dz(4 * h, 0.0);
    for (std::size_t s = steps; s-- > 0;) {
        const StepCache& sc = caches[s];
        for (std::size_t k = 0; k < h; ++k) {
            const double gi = sc.gates[k], gf = sc.gates[h + k], gg = sc.gates[2 * h + k], go = sc.gates[3 * h + k];
            const double dh = d_hidden[s][k] + dh_rec[k];
            const double tc = sc.tanh_cell[k];
            const double d_o = dh * tc;
            const double dc = dc_rec[k] + dh * go * (1.0 - tc * tc);
            const double d_i = dc * gg;
            const double d_g = dc * gi;
            const double d_f = dc * sc.c_prev[k];
            dc_rec[k] = dc * gf;
            dz[k] = d_i * gi * (1.0 - gi);
            dz[h + k] = d_f * gf * (1.0 - gf);
            dz[2 * h + k] = d_g * (1.0 - gg * gg);
            dz[3 * h + k] = d_o * go * (1.0 - go);
        }
        std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
        auto& dx = d_inputs[s];
        for (std::size_t r = 0; r < 4 * h; ++r) {
            const double d = dz[r];
            grad.bias[r] += d;
            for (std::size_t j = 0; j < in; ++j) {
                gw[r * in + j] += d * sc.x[j];
                dx[j] += w[r * in + j] * d;
            }
            for (std::size_t j = 0; j < h; ++j) {
                gu[r * h + j] += d * sc.h_prev[j];
                dh_rec[j] += u[r * h + j] * d;
            }
        }
    }
    return d_inputs;
}

}  // namespace

std::uint64_t Prng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix_seed(state_);
}

std::uint64_t mix_seed(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Prng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Prng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

std::uint64_t Prng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Prng::below: bound must be positive");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

std::size_t NetworkParams::feature_dim() const {
    const std::size_t h = layers.back().hidden_dim();
    return direction == Direction::bidirectional ? 2 * h : h;
}

std::size_t NetworkParams::scalar_count() const {
    std::size_t n = readout.weights.size() + 1;
    for (const auto& l : layers) n += l.scalar_count();
    return n;
}

void NetworkParams::validate() const {
    require(!layers.empty(), "network needs at least one layer");
    for (const auto& l : layers) check_layer(l);
    if (direction == Direction::bidirectional) {
        require(layers.size() == 2, "bidirectional network needs exactly one layer pair");
        require(layers[0].input_dim() == layers[1].input_dim() && layers[0].hidden_dim() == layers[1].hidden_dim(),
                "bidirectional layer pair must match in shape");
    } else {
        for (std::size_t l = 1; l < layers.size(); ++l)
            require(layers[l].input_dim() == layers[l - 1].hidden_dim(), "stacked layer input dims do not chain");
    }
    require(readout.weights.size() == feature_dim(), "readout width does not match hidden features");
}

GradientSet zeros_like(const NetworkParams& params) {
    GradientSet g = params;
    for_each_block(g, [](std::span<double> block) { std::fill(block.begin(), block.end(), 0.0); });
    return g;
}

void for_each_block(NetworkParams& params, const std::function<void(std::span<double>)>& visit) {
    for (auto& l : params.layers) {
        visit(l.w_input.data());
        visit(l.w_recurrent.data());
        visit(l.bias);
    }
    visit(params.readout.weights);
    visit(std::span<double>(&params.readout.bias, 1));
}

std::vector<double> flatten(const NetworkParams& params) {
    std::vector<double> out;
    out.reserve(params.scalar_count());
    const auto append = [&out](std::span<const double> block) { out.insert(out.end(), block.begin(), block.end()); };
    for (const auto& l : params.layers) {
        append(l.w_input.data());
        append(l.w_recurrent.data());
        append(l.bias);
    }
    append(params.readout.weights);
    out.push_back(params.readout.bias);
    return out;
}

void assign_flat(NetworkParams& params, std::span<const double> flat) {
    if (flat.size() != params.scalar_count()) throw ShapeError("flat parameter vector has wrong length");
    std::size_t off = 0;
    for_each_block(params, [&](std::span<double> block) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), block.size(), block.begin());
        off += block.size();
    });
}

LstmLayerParams init_lstm_params(std::size_t in, std::size_t h, Prng& rng) {
    if (in < 1 || h < 1) throw ShapeError("init_lstm_params: in and h must be >= 1");
    LstmLayerParams p{Matrix(4 * h, in), Matrix(4 * h, h), std::vector<double>(4 * h, 0.0)};
    // Glorot-uniform per matrix: fan_in = columns, fan_out = 4h rows.
    const double a_in = std::sqrt(6.0 / static_cast<double>(in + 4 * h));
    for (double& w : p.w_input.data()) w = rng.uniform(-a_in, a_in);
    const double a_rec = std::sqrt(6.0 / static_cast<double>(h + 4 * h));
    for (double& w : p.w_recurrent.data()) w = rng.uniform(-a_rec, a_rec);
    std::fill(p.bias.begin() + static_cast<std::ptrdiff_t>(h), p.bias.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
    return p;
}

ReadoutParams init_readout(std::size_t features, Prng& rng) {
    if (features < 1) throw ShapeError("init_readout: features must be >= 1");
    ReadoutParams r{std::vector<double>(features), 0.0};
    const double a = std::sqrt(6.0 / static_cast<double>(features + 1));
    for (double& w : r.weights) w = rng.uniform(-a, a);
    return r;
}

StepResult lstm_step_forward(std::span<const double> x, const LstmState& state, const LstmLayerParams& p) {
    check_layer(p);
    require(x.size() == p.input_dim(), "lstm_step_forward: input size mismatch");
    require(state.hidden.size() == p.hidden_dim() && state.cell.size() == p.hidden_dim(),
            "lstm_step_forward: state size mismatch");
    StepResult out;
    out.cache = step(p, x, state.hidden, state.cell);
    out.state = LstmState{hidden_of(out.cache), out.cache.cell};
    return out;
}

ForwardResult lstm_sequence_forward(const Sequence& xs, const NetworkParams& params) {
    params.validate();
    check_sequence(xs, params);
    ForwardResult out;
    SequenceCache& cache = out.cache;
    cache.steps = xs.steps();
    cache.input_dim = xs.dim;
    cache.direction = params.direction;
    for (const auto& l : params.layers) cache.hidden_dims.push_back(l.hidden_dim());

    auto inputs = split_steps(xs);
    if (params.direction == Direction::bidirectional) {
        cache.layers.push_back(run_layer(params.layers[0], inputs));
        std::reverse(inputs.begin(), inputs.end());
        cache.layers.push_back(run_layer(params.layers[1], inputs));
        cache.features = hidden_of(cache.layers[0].back());
        const auto back = hidden_of(cache.layers[1].back());
        cache.features.insert(cache.features.end(), back.begin(), back.end());
    } else {
        for (const auto& layer : params.layers) {
            cache.layers.push_back(run_layer(layer, inputs));
            for (std::size_t t = 0; t < inputs.size(); ++t) inputs[t] = hidden_of(cache.layers.back()[t]);
        }
        cache.features = inputs.back();
    }
    out.prediction = readout(params.readout, cache.features);
    return out;
}

namespace {

template <class Real>
Real sigmoid_of(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

// Cache-free forward pass over `values` (steps x dim), generic in the working precision.
template <class Real>
Real predict_impl(std::span<const Real> values, std::size_t in_dim, const NetworkParams& params) {
    const std::size_t steps = values.size() / in_dim;
    std::vector<Real> features;
    std::vector<Real> z;

    // Runs a layer from zero state, writing every hidden output into `hs` (steps x h).
    const auto run = [&](const LstmLayerParams& p, std::span<const Real> in_seq, std::size_t dim, bool reversed,
                         std::vector<Real>& hs) {
        const std::size_t h = p.hidden_dim();
        const double* w = p.w_input.data().data();
        const double* u = p.w_recurrent.data().data();
        std::vector<Real> h_prev(h, Real(0)), c(h, Real(0));
        hs.assign(steps * h, Real(0));
        z.resize(4 * h);
        for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t t = reversed ? steps - 1 - s : s;
            const Real* x = in_seq.data() + t * dim;
            for (std::size_t r = 0; r < 4 * h; ++r) {
                Real acc = p.bias[r];
                for (std::size_t j = 0; j < dim; ++j) acc += Real(w[r * dim + j]) * x[j];
                for (std::size_t j = 0; j < h; ++j) acc += Real(u[r * h + j]) * h_prev[j];
                z[r] = acc;
            }
            for (std::size_t k = 0; k < h; ++k) {
                z[k] = sigmoid_of(z[k]);
                z[h + k] = sigmoid_of(z[h + k]);
                z[2 * h + k] = std::tanh(z[2 * h + k]);
                z[3 * h + k] = sigmoid_of(z[3 * h + k]);
            }
            for (std::size_t k = 0; k < h; ++k) {
                c[k] = z[h + k] * c[k] + z[k] * z[2 * h + k];
                h_prev[k] = z[3 * h + k] * std::tanh(c[k]);
            }
            std::copy(h_prev.begin(), h_prev.end(), hs.begin() + static_cast<std::ptrdiff_t>(s * h));
        }
    };

    std::vector<Real> hs;
    if (params.direction == Direction::bidirectional) {
        require(params.layers.size() == 2, "bidirectional network needs exactly one layer pair");
        const std::size_t h = params.layers[0].hidden_dim();
        run(params.layers[0], values, in_dim, false, hs);
        features.assign(hs.end() - static_cast<std::ptrdiff_t>(h), hs.end());
        run(params.layers[1], values, in_dim, true, hs);
        features.insert(features.end(), hs.end() - static_cast<std::ptrdiff_t>(h), hs.end());
    } else {
        std::vector<Real> seq(values.begin(), values.end());
        std::size_t dim = in_dim;
        for (const auto& layer : params.layers) {
            require(layer.input_dim() == dim, "stacked layer input dims do not chain");
            run(layer, seq, dim, false, hs);
            seq.swap(hs);
            dim = layer.hidden_dim();
        }
        features.assign(seq.end() - static_cast<std::ptrdiff_t>(dim), seq.end());
    }
    require(params.readout.weights.size() == features.size(), "readout width does not match hidden features");
    Real acc = params.readout.bias;
    for (std::size_t k = 0; k < features.size(); ++k) acc += Real(params.readout.weights[k]) * features[k];
    return acc;
}

}  // namespace

double lstm_predict(const Sequence& xs, const NetworkParams& params) {
    check_sequence(xs, params);
    return predict_impl<double>(xs.values, xs.dim, params);
}

long double lstm_predict_extended(std::span<const long double> values, std::size_t dim, const NetworkParams& params) {
    if (dim == 0 || values.empty()) throw ShapeError("empty input sequence");
    require(values.size() % dim == 0, "sequence values not a multiple of dim");
    require(dim == params.input_dim(), "sequence dim does not match network input dim");
    return predict_impl<long double>(values, dim, params);
}

BackwardResult lstm_backward_bptt(const NetworkParams& params, const SequenceCache& cache, double d_prediction) {
    params.validate();
    require(cache.direction == params.direction && cache.layers.size() == params.layers.size() &&
                cache.input_dim == params.input_dim() && cache.features.size() == params.feature_dim(),
            "lstm_backward_bptt: cache does not match parameters");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        require(cache.hidden_dims[l] == params.layers[l].hidden_dim() && cache.layers[l].size() == cache.steps,
                "lstm_backward_bptt: stale cache");
    }

    BackwardResult out;
    out.grads = zeros_like(params);
    out.input_grads.dim = cache.input_dim;
    out.input_grads.values.assign(cache.steps * cache.input_dim, 0.0);

    const auto& w = params.readout.weights;
    for (std::size_t k = 0; k < w.size(); ++k) out.grads.readout.weights[k] = d_prediction * cache.features[k];
    out.grads.readout.bias = d_prediction;

    const std::size_t steps = cache.steps;
    if (params.direction == Direction::bidirectional) {
        const std::size_t h = params.layers[0].hidden_dim();
        for (std::size_t dir = 0; dir < 2; ++dir) {
            std::vector<std::vector<double>> d_hidden(steps, std::vector<double>(h, 0.0));
            for (std::size_t k = 0; k < h; ++k) d_hidden[steps - 1][k] = w[dir * h + k] * d_prediction;
            const auto d_in = backward_layer(params.layers[dir], cache.layers[dir], d_hidden, out.grads.layers[dir]);
            for (std::size_t s = 0; s < steps; ++s) {
                const std::size_t t = dir == 0 ? s : steps - 1 - s;
                auto dst = out.input_grads.step(t);
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += d_in[s][j];
            }
        }
        return out;
    }

    const std::size_t top_h = params.layers.back().hidden_dim();
    std::vector<std::vector<double>> d_hidden(steps, std::vector<double>(top_h, 0.0));
    for (std::size_t k = 0; k < top_h; ++k) d_hidden[steps - 1][k] = w[k] * d_prediction;
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        d_hidden = backward_layer(params.layers[l], cache.layers[l], d_hidden, out.grads.layers[l]);
    }
    for (std::size_t t = 0; t < steps; ++t) {
        auto dst = out.input_grads.step(t);
        std::copy(d_hidden[t].begin(), d_hidden[t].end(), dst.begin());
    }
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& opt) {
    if (params.size() != grads.size() || params.size() != opt.first_moment.size() ||
        params.size() != opt.second_moment.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
    }
    const AdamHyper& hp = opt.hyper;
    ++opt.step_count;
    const double t = static_cast<double>(opt.step_count);
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        double& m = opt.first_moment[k];
        double& v = opt.second_moment[k];
        m = hp.beta1 * m + (1.0 - hp.beta1) * g;
        v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[k] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

void adam_step(NetworkParams& params, const GradientSet& grads, AdamState& opt) {
    const std::size_t n = params.scalar_count();
    if (grads.scalar_count() != n || grads.layers.size() != params.layers.size())
        throw ShapeError("adam_step: gradient set is not shape-congruent with parameters");
    if (opt.first_moment.size() != n) throw ShapeError("adam_step: optimizer state sized for another network");
    std::vector<double> flat = flatten(params);
    const std::vector<double> g = flatten(grads);
    adam_step(std::span<double>(flat), g, opt);
    assign_flat(params, flat);
}

std::vector<double> finite_difference_gradients(const std::function<long double(std::span<const double>)>& loss,
                                                std::span<const double> theta, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite differences need eps > 0");
    std::vector<double> x(theta.begin(), theta.end());
    std::vector<double> grad(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + eps;
        const long double up = loss(x);
        x[k] = saved - eps;
        const long double down = loss(x);
        x[k] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::domain_error("non-finite loss at coordinate " + std::to_string(k));
        grad[k] = static_cast<double>((up - down) / (2.0L * eps));
    }
    return grad;
}

GradientSet finite_difference_gradients(const std::function<long double(const NetworkParams&)>& loss,
                                        const NetworkParams& params, double eps) {
    NetworkParams probe = params;
    const auto flat = flatten(params);
    const auto g = finite_difference_gradients(
        [&](std::span<const double> theta) -> long double {
            assign_flat(probe, theta);
            return loss(probe);
        },
        flat, eps);
    GradientSet out = zeros_like(params);
    assign_flat(out, g);
    return out;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

}  // namespace eids::nn
