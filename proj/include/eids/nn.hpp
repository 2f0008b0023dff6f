#ifndef EIDS_NN_HPP
#define EIDS_NN_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace eids::nn {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// SplitMix64 stream. The algorithm is fixed so seeded runs reproduce anywhere.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double next_double();
    double uniform(double lo, double hi);
    /// Uniform integer on [0, bound).
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// One SplitMix64 finalizer pass; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Gate blocks are stacked row-wise in the order [input, forget, candidate, output].
struct LstmLayerParams {
    Matrix w_input;      // 4h x in
    Matrix w_recurrent;  // 4h x h
    std::vector<double> bias;  // 4h

    std::size_t input_dim() const { return w_input.cols(); }
    std::size_t hidden_dim() const { return w_recurrent.cols(); }
    std::size_t scalar_count() const { return w_input.data().size() + w_recurrent.data().size() + bias.size(); }

    bool operator==(const LstmLayerParams&) const = default;
};

struct LstmState {
    std::vector<double> hidden;
    std::vector<double> cell;

    static LstmState zeros(std::size_t h) { return {std::vector<double>(h, 0.0), std::vector<double>(h, 0.0)}; }
};

struct ReadoutParams {
    std::vector<double> weights;
    double bias = 0.0;

    bool operator==(const ReadoutParams&) const = default;
};

enum class Direction { forward, bidirectional };

/**
 * One recurrent network: an LSTM stack plus an affine scalar readout.
 *
 * Forward networks hold any number of stacked layers. Bidirectional networks
 * hold exactly two layers, {forward-direction, backward-direction}, both fed
 * the raw input sequence; the readout sees their concatenated final states.
 */
struct NetworkParams {
    Direction direction = Direction::forward;
    std::vector<LstmLayerParams> layers;
    ReadoutParams readout;

    std::size_t input_dim() const { return layers.front().input_dim(); }
    std::size_t feature_dim() const;
    std::size_t scalar_count() const;
    void validate() const;

    bool operator==(const NetworkParams&) const = default;
};

/// Gradients mirror the parameter layout exactly.
using GradientSet = NetworkParams;

GradientSet zeros_like(const NetworkParams& params);

/// Parameter scalars in a fixed order: per layer (w_input, w_recurrent, bias), then readout weights, readout bias.
std::vector<double> flatten(const NetworkParams& params);
void assign_flat(NetworkParams& params, std::span<const double> flat);

/// Visits every parameter block as a mutable span in flatten() order.
void for_each_block(NetworkParams& params, const std::function<void(std::span<double>)>& visit);

/// Input sequence: `steps` rows of `dim` features, row-major.
struct Sequence {
    std::size_t dim = 1;
    std::vector<double> values;

    std::size_t steps() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> step(std::size_t t) const { return {values.data() + t * dim, dim}; }
    std::span<double> step(std::size_t t) { return {values.data() + t * dim, dim}; }
};

LstmLayerParams init_lstm_params(std::size_t in, std::size_t h, Prng& rng);
ReadoutParams init_readout(std::size_t features, Prng& rng);

/// Everything the backward pass needs from one time step.
struct StepCache {
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> c_prev;
    std::vector<double> gates;  // post-activation [i, f, g, o], 4h
    std::vector<double> cell;
    std::vector<double> tanh_cell;
};

struct StepResult {
    LstmState state;
    StepCache cache;
};

StepResult lstm_step_forward(std::span<const double> x, const LstmState& state, const LstmLayerParams& p);

struct SequenceCache {
    std::size_t steps = 0;
    std::size_t input_dim = 0;
    Direction direction = Direction::forward;
    std::vector<std::size_t> hidden_dims;
    std::vector<std::vector<StepCache>> layers;  // [layer][step in processing order]
    std::vector<double> features;
};

struct ForwardResult {
    double prediction = 0.0;
    SequenceCache cache;
};

ForwardResult lstm_sequence_forward(const Sequence& xs, const NetworkParams& params);

/// Prediction only; skips cache construction.
double lstm_predict(const Sequence& xs, const NetworkParams& params);

/// The same forward pass carried out in long double (a reference for finite differences).
long double lstm_predict_extended(std::span<const long double> values, std::size_t dim, const NetworkParams& params);

struct BackwardResult {
    GradientSet grads;
    Sequence input_grads;  // d prediction / d xs, same shape as the forward input
};

/// Exact reverse-mode gradients of `d_prediction * prediction` through all steps and layers.
BackwardResult lstm_backward_bptt(const NetworkParams& params, const SequenceCache& cache, double d_prediction);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamHyper h)
        : hyper(h), first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// Bias-corrected Adam update on a flat parameter vector.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& opt);
void adam_step(NetworkParams& params, const GradientSet& grads, AdamState& opt);

/// Central differences (L(t+eps) - L(t-eps)) / 2eps per coordinate, differenced in long double.
std::vector<double> finite_difference_gradients(const std::function<long double(std::span<const double>)>& loss,
                                                std::span<const double> theta, double eps = 1e-5);
GradientSet finite_difference_gradients(const std::function<long double(const NetworkParams&)>& loss,
                                        const NetworkParams& params, double eps = 1e-5);

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

}  // namespace eids::nn

#endif  // EIDS_NN_HPP
