#include "eids/training.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>

namespace eids {

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546464C45ULL;

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::full: return "full";
        case Objective::sensory: return "a";
        case Objective::excitatory: return "b";
        case Objective::inhibitory: return "c";
    }
    return "?";
}

std::size_t subnet_of(Objective o) {
    switch (o) {
        case Objective::sensory: return kSensory;
        case Objective::excitatory: return kExcitatory;
        case Objective::inhibitory: return kInhibitory;
        case Objective::full: break;
    }
    return 0;
}

void check_objective(const Forecaster& f, Objective o) {
    if (!f.is_eids() && o != Objective::full)
        throw std::invalid_argument("stage objectives apply to EiDS forecasters only");
}

void accumulate(nn::GradientSet& into, const nn::GradientSet& g) {
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        auto& a = into.layers[l];
        const auto& b = g.layers[l];
        for (std::size_t k = 0; k < a.w_input.data().size(); ++k) a.w_input.data()[k] += b.w_input.data()[k];
        for (std::size_t k = 0; k < a.w_recurrent.data().size(); ++k)
            a.w_recurrent.data()[k] += b.w_recurrent.data()[k];
        for (std::size_t k = 0; k < a.bias.size(); ++k) a.bias[k] += b.bias[k];
    }
    for (std::size_t k = 0; k < into.readout.weights.size(); ++k) into.readout.weights[k] += g.readout.weights[k];
    into.readout.bias += g.readout.bias;
}

// The sequences and targets one subnet sees for a training pass.
struct SubnetProblem {
    std::vector<nn::Sequence> inputs;
    std::vector<double> targets;
};

SubnetProblem make_problem(const Forecaster& f, const SupervisedDataset& data, Objective o) {
    SubnetProblem p;
    p.inputs.reserve(data.size());
    p.targets.reserve(data.size());
    for (const auto& pair : data.pairs) {
        if (pair.inputs.size() != f.window_dim) throw std::invalid_argument("training pair has wrong window length");
        switch (o) {
            case Objective::full:
            case Objective::sensory:
                p.inputs.push_back(window_sequence(pair.inputs));
                p.targets.push_back(pair.target);
                break;
            case Objective::excitatory: {
                const double a[] = {nn::lstm_predict(window_sequence(pair.inputs), f.subnets[kSensory])};
                p.inputs.push_back(window_sequence(pair.inputs, a));
                p.targets.push_back(pair.target);
                break;
            }
            case Objective::inhibitory: {
                const auto out = eids_components(f, pair.inputs);
                const double ab[] = {out.sensory, out.excitatory};
                p.inputs.push_back(window_sequence(pair.inputs, ab));
                p.targets.push_back(out.excitatory - pair.target);
                break;
            }
        }
    }
    return p;
}

double problem_mse(const nn::NetworkParams& net, const SubnetProblem& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.inputs.size(); ++i) {
        const double r = nn::lstm_predict(p.inputs[i], net) - p.targets[i];
        sum += r * r;
    }
    return sum / static_cast<double>(p.inputs.size());
}

ConvergenceLog fit_subnet(nn::NetworkParams& net, const SubnetProblem& p, const TrainConfig& cfg,
                          const std::string& stage) {
    cfg.validate();
    if (p.inputs.empty()) throw std::invalid_argument("training set is empty");
    const std::size_t n = p.inputs.size();
    nn::Prng rng(nn::mix_seed(cfg.seed ^ kShuffleStream));
    nn::AdamState opt(net.scalar_count(), cfg.optimizer);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    ConvergenceLog log;
    log.entries.reserve(cfg.iterations);
    for (std::size_t epoch = 1; epoch <= cfg.iterations; ++epoch) {
        if (cfg.shuffle) {
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        }
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            nn::GradientSet grads = nn::zeros_like(net);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const auto fwd = nn::lstm_sequence_forward(p.inputs[i], net);
                const double d = 2.0 * (fwd.prediction - p.targets[i]) * inv_batch;
                accumulate(grads, nn::lstm_backward_bptt(net, fwd.cache, d).grads);
            }
            nn::adam_step(net, grads, opt);
        }
        const double loss = problem_mse(net, p);
        if (!std::isfinite(loss)) throw TrainingError(stage, epoch, "training loss is not finite");
        log.entries.push_back({epoch, loss});
    }
    return log;
}

struct EidsForward {
    nn::ForwardResult sensory, excitatory, inhibitory;
};

EidsForward eids_forward(const Forecaster& f, std::span<const double> window) {
    EidsForward out;
    out.sensory = nn::lstm_sequence_forward(window_sequence(window), f.subnets[kSensory]);
    const double a[] = {out.sensory.prediction};
    out.excitatory = nn::lstm_sequence_forward(window_sequence(window, a), f.subnets[kExcitatory]);
    const double ab[] = {out.sensory.prediction, out.excitatory.prediction};
    out.inhibitory = nn::lstm_sequence_forward(window_sequence(window, ab), f.subnets[kInhibitory]);
    return out;
}

// Sum over steps of one broadcast coordinate's input gradient.
double broadcast_grad(const nn::Sequence& g, std::size_t coord) {
    double s = 0.0;
    for (std::size_t t = 0; t < g.steps(); ++t) s += g.step(t)[coord];
    return s;
}


std::vector<long double> extended_window(std::span<const double> window, std::initializer_list<long double> extra) {
    std::vector<long double> seq;
    for (double x : window) {
        seq.push_back(x);
        seq.insert(seq.end(), extra.begin(), extra.end());
    }
    return seq;
}

// objective_loss evaluated in long double throughout; the finite-difference reference.
long double objective_loss_extended(const Forecaster& f, const StateVectorPair& pair, Objective objective) {
    const long double y = pair.target;
    const long double a = nn::lstm_predict_extended(extended_window(pair.inputs, {}), 1, f.subnets.front());
    long double r = a - y;
    if (f.is_eids() && objective != Objective::sensory) {
        const long double b = nn::lstm_predict_extended(extended_window(pair.inputs, {a}), 2, f.subnets[kExcitatory]);
        const long double c = nn::lstm_predict_extended(extended_window(pair.inputs, {a, b}), 3, f.subnets[kInhibitory]);
        switch (objective) {
            case Objective::full: r = (b - c) - y; break;
            case Objective::excitatory: r = b - y; break;
            case Objective::inhibitory: r = c - (b - y); break;
            case Objective::sensory: break;
        }
    }
    return r * r;
}

}  // namespace

TrainingError::TrainingError(const std::string& stage, std::size_t epoch, const std::string& what)
    : std::runtime_error("stage " + stage + ", epoch " + std::to_string(epoch) + ": " + what),
      stage_(stage),
      epoch_(epoch) {}

void TrainConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(optimizer.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

StageSchedule StageSchedule::from_triple(const EidsIterationTriple& triple, const TrainConfig& base) {
    StageSchedule s;
    const std::size_t counts[] = {triple.sensory, triple.excitatory, triple.inhibitory};
    for (std::size_t k = 0; k < 3; ++k) {
        s.stages[k] = base;
        s.stages[k].iterations = counts[k];
        s.stages[k].seed = base.seed + k;
    }
    return s;
}

EidsIterationTriple StageSchedule::triple() const {
    return {stages[0].iterations, stages[1].iterations, stages[2].iterations};
}

double loss_mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw std::invalid_argument("loss_mse: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("loss_mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = predictions[i] - targets[i];
        sum += r * r;
    }
    return sum / static_cast<double>(predictions.size());
}

ConvergenceLog train(Forecaster& f, const SupervisedDataset& train_set, const TrainConfig& cfg) {
    if (f.is_eids()) throw std::invalid_argument("train: EiDS forecasters are trained with train_eids_staged");
    auto log = fit_subnet(f.subnets.front(), make_problem(f, train_set, Objective::full), cfg, "full");
    f.stage_trained.front() = true;
    return log;
}

ConvergenceLog train_stage(Forecaster& f, const SupervisedDataset& train_set, const TrainConfig& cfg,
                           Objective stage) {
    if (!f.is_eids() || stage == Objective::full)
        throw std::invalid_argument("train_stage: needs an EiDS forecaster and a stage objective");
    const std::size_t idx = subnet_of(stage);
    const auto problem = make_problem(f, train_set, stage);
    auto log = fit_subnet(f.subnets[idx], problem, cfg, objective_name(stage));
    log.stage_label = objective_name(stage);
    f.stage_trained[idx] = true;
    return log;
}

std::array<ConvergenceLog, 3> train_eids_staged(Forecaster& f, const SupervisedDataset& train_set,
                                                const StageSchedule& schedule) {
    if (!f.is_eids()) throw std::invalid_argument("train_eids_staged: forecaster is not EiDS");
    return {train_stage(f, train_set, schedule.stages[0], Objective::sensory),
            train_stage(f, train_set, schedule.stages[1], Objective::excitatory),
            train_stage(f, train_set, schedule.stages[2], Objective::inhibitory)};
}

double objective_loss(const Forecaster& f, const StateVectorPair& pair, Objective objective) {
    check_objective(f, objective);
    double r = 0.0;
    if (!f.is_eids()) {
        r = predict(f, pair.inputs) - pair.target;
    } else {
        const auto out = eids_components(f, pair.inputs);
        switch (objective) {
            case Objective::full: r = out.composite() - pair.target; break;
            case Objective::sensory: r = out.sensory - pair.target; break;
            case Objective::excitatory: r = out.excitatory - pair.target; break;
            case Objective::inhibitory: r = out.inhibitory - (out.excitatory - pair.target); break;
        }
    }
    return r * r;
}

std::vector<nn::GradientSet> objective_gradients(const Forecaster& f, const StateVectorPair& pair,
                                                 Objective objective) {
    check_objective(f, objective);
    std::vector<nn::GradientSet> grads;
    for (const auto& s : f.subnets) grads.push_back(nn::zeros_like(s));

    if (!f.is_eids()) {
        const auto fwd = nn::lstm_sequence_forward(window_sequence(pair.inputs), f.subnets.front());
        grads.front() = nn::lstm_backward_bptt(f.subnets.front(), fwd.cache, 2.0 * (fwd.prediction - pair.target)).grads;
        return grads;
    }

    const auto fw = eids_forward(f, pair.inputs);
    const double ya = fw.sensory.prediction, yb = fw.excitatory.prediction, yc = fw.inhibitory.prediction;
    switch (objective) {
        case Objective::sensory:
            grads[kSensory] = nn::lstm_backward_bptt(f.subnets[kSensory], fw.sensory.cache, 2.0 * (ya - pair.target)).grads;
            break;
        case Objective::excitatory:
            grads[kExcitatory] =
                nn::lstm_backward_bptt(f.subnets[kExcitatory], fw.excitatory.cache, 2.0 * (yb - pair.target)).grads;
            break;
        case Objective::inhibitory:
            grads[kInhibitory] = nn::lstm_backward_bptt(f.subnets[kInhibitory], fw.inhibitory.cache,
                                                        2.0 * (yc - (yb - pair.target)))
                                     .grads;
            break;
        case Objective::full: {
            // y = y_b - y_c, where y_a feeds b and c and y_b feeds c.
            const double d = 2.0 * (yb - yc - pair.target);
            auto bc = nn::lstm_backward_bptt(f.subnets[kInhibitory], fw.inhibitory.cache, -d);
            double d_ya = broadcast_grad(bc.input_grads, 1);
            const double d_yb = d + broadcast_grad(bc.input_grads, 2);
            auto bb = nn::lstm_backward_bptt(f.subnets[kExcitatory], fw.excitatory.cache, d_yb);
            d_ya += broadcast_grad(bb.input_grads, 1);
            auto ba = nn::lstm_backward_bptt(f.subnets[kSensory], fw.sensory.cache, d_ya);
            grads[kSensory] = std::move(ba.grads);
            grads[kExcitatory] = std::move(bb.grads);
            grads[kInhibitory] = std::move(bc.grads);
            break;
        }
    }
    return grads;
}

GradientCheckReport gradient_check_model(const Forecaster& f, const StateVectorPair& pair, double eps,
                                         Objective objective) {
    if (!(eps > 0.0)) throw std::invalid_argument("gradient check needs eps > 0");
    check_objective(f, objective);
    const auto analytic = objective_gradients(f, pair, objective);
    const double base = objective_loss(f, pair, objective);
    if (!std::isfinite(base)) throw std::domain_error("gradient check: loss is not finite");

    GradientCheckReport report;
    for (std::size_t s = 0; s < f.subnets.size(); ++s) {
        const bool trainable = objective == Objective::full || s == subnet_of(objective);
        const auto a = nn::flatten(analytic[s]);
        if (!trainable) {
            for (double v : a)
                if (v != 0.0) report.max_relative_error = std::max(report.max_relative_error, 1.0);
            report.frozen += a.size();
            continue;
        }
        Forecaster probe = f;
        const auto numeric = nn::finite_difference_gradients(
            [&](const nn::NetworkParams& p) {
                probe.subnets[s] = p;
                return objective_loss_extended(probe, pair, objective);
            },
            f.subnets[s], eps);
        const auto n = nn::flatten(numeric);
        for (std::size_t k = 0; k < a.size(); ++k)
            report.max_relative_error = std::max(report.max_relative_error, nn::relative_error(a[k], n[k]));
        report.checked += a.size();
    }
    return report;
}

}  // namespace eids
