#ifndef EIDS_SERIES_HPP
#define EIDS_SERIES_HPP

#include <cstddef>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eids {

/// Raised for malformed or insufficient series data.
class SeriesError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Uniformly sampled scalar signal.
 *
 * Values are finite and non-empty; sample_period is carried as metadata
 * (milliseconds per sample) and never affects indexing.
 */
class TimeSeries {
public:
    TimeSeries(std::vector<double> values, double sample_period, std::string label = {});

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }
    double sample_period() const { return sample_period_; }
    const std::string& label() const { return label_; }

private:
    std::vector<double> values_;
    double sample_period_;
    std::string label_;
};

/// D lagged inputs spaced by the horizon; the target lies one horizon past the newest input.
struct EmbeddingSpec {
    std::size_t embed_dim = 2;
    std::size_t horizon = 1;

    std::size_t span() const { return embed_dim * horizon; }
    void validate() const;
    bool operator==(const EmbeddingSpec&) const = default;
};

struct StateVectorPair {
    std::vector<double> inputs;  // oldest -> newest
    double target = 0.0;

    bool operator==(const StateVectorPair&) const = default;
};

struct SupervisedDataset {
    std::vector<StateVectorPair> pairs;
    EmbeddingSpec spec;
    std::size_t origin_offset = 0;  // source index of pairs[0].target

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

struct NormalizationStats {
    double mean = 0.0;
    double std_dev = 1.0;

    double apply(double x) const { return (x - mean) / std_dev; }
    double invert(double z) const { return z * std_dev + mean; }
};

TimeSeries load_csv(std::istream& source, double sample_period, std::string label = {});
TimeSeries load_csv_file(const std::string& path, double sample_period);

struct MackeyGlassParams {
    double beta = 0.2;
    double gamma = 0.1;
    double tau = 17.0;
    double exponent = 10.0;
    double dt = 1.0;
};

/// RK4 integration of the Mackey-Glass delay equation, one sample per dt step.
/// The delay buffer starts at the constant `history`, which is also sample 0.
TimeSeries generate_mackey_glass(std::size_t n, double history = 1.2,
                                 const MackeyGlassParams& params = {});

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    double dt = 0.01;
};

enum class Axis { x, y, z };

struct Vec3 {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;
};

TimeSeries generate_lorenz(std::size_t n, Vec3 initial = {}, const LorenzParams& params = {},
                           Axis component = Axis::x);

SupervisedDataset embed(const TimeSeries& series, const EmbeddingSpec& spec);

/// Contiguous, order-preserving split: first n_train pairs, then the next n_test.
std::pair<SupervisedDataset, SupervisedDataset> split_train_test(const SupervisedDataset& dataset,
                                                                 std::size_t n_train,
                                                                 std::size_t n_test);

/// Pooled mean / population std over every input and target value of the training set.
NormalizationStats fit_normalizer(const SupervisedDataset& train);

std::vector<double> apply_normalization(const NormalizationStats& stats, std::span<const double> xs);
std::vector<double> invert_normalization(const NormalizationStats& stats, std::span<const double> zs);
SupervisedDataset normalize(const SupervisedDataset& dataset, const NormalizationStats& stats);

}  // namespace eids

#endif  // EIDS_SERIES_HPP
