#ifndef EIDS_MODELS_HPP
#define EIDS_MODELS_HPP

#include "eids/nn.hpp"
#include "eids/series.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eids {

class ModelSpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Family { vanilla, stacked, bidirectional, eids };

/// "vanilla" / "stacked" / "bidirectional" / "eids"
std::string_view family_key(Family f);
/// Table-style display name, e.g. "Vanilla LSTM".
std::string_view family_display_name(Family f);
Family parse_family(std::string_view key);

struct VanillaSpec {
    std::size_t cells = 1;
    bool operator==(const VanillaSpec&) const = default;
};

struct StackedSpec {
    std::vector<std::size_t> cells_per_layer;
    bool operator==(const StackedSpec&) const = default;
};

/// Cells per direction.
struct BidirectionalSpec {
    std::size_t cells = 1;
    bool operator==(const BidirectionalSpec&) const = default;
};

struct SubnetShape {
    std::size_t layers = 1;
    std::size_t cells = 1;
    bool operator==(const SubnetShape&) const = default;
};

/// Sensory (a), excitatory (b) and inhibitory (c) subnets.
struct EidsSpec {
    SubnetShape sensory;
    SubnetShape excitatory;
    SubnetShape inhibitory;
    bool operator==(const EidsSpec&) const = default;
};

struct ModelSpec {
    std::variant<VanillaSpec, StackedSpec, BidirectionalSpec, EidsSpec> variant;

    Family family() const;
    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/**
 * Parses the architecture notation of the comparison table.
 *
 *   vanilla / bidirectional   "(1,14)"                 layers must be 1
 *   stacked                   "(3,9,8,3)", "(3,15-8-5)" first entry is the layer count
 *   eids                      "((1,6),(1,5),(1,7))"    an "_<digits>" suffix is ignored
 *
 * Whitespace is ignored and "-" and "," are interchangeable inner separators.
 */
ModelSpec parse_model_spec(std::string_view text, Family family);
std::string format_model_spec(const ModelSpec& spec);

/// Subnet indices inside an EiDS forecaster.
inline constexpr std::size_t kSensory = 0;
inline constexpr std::size_t kExcitatory = 1;
inline constexpr std::size_t kInhibitory = 2;

/**
 * A built model. Baselines hold one subnet fed the window as D scalar steps.
 *
 * EiDS holds three: the sensory subnet sees the raw window; the excitatory
 * subnet sees (x_t, y_a) at every step; the inhibitory subnet sees
 * (x_t, y_a, y_b). The forecast is y_b - y_c.
 */
struct Forecaster {
    ModelSpec spec;
    std::size_t window_dim = 0;
    std::vector<nn::NetworkParams> subnets;
    std::vector<bool> stage_trained;

    bool is_eids() const { return spec.family() == Family::eids; }
    std::size_t scalar_count() const;
};

Forecaster build_forecaster(const ModelSpec& spec, std::size_t window_dim, nn::Prng& rng);

/// Analytic parameter count for a spec at window dimension D.
std::size_t param_count(const ModelSpec& spec, std::size_t window_dim);

/// Window as a sequence of scalar steps, optionally broadcasting extra coordinates at each step.
nn::Sequence window_sequence(std::span<const double> window, std::span<const double> broadcast = {});

struct EidsOutputs {
    double sensory = 0.0;
    double excitatory = 0.0;
    double inhibitory = 0.0;

    double composite() const { return excitatory - inhibitory; }
};

EidsOutputs eids_components(const Forecaster& f, std::span<const double> window);

double predict(const Forecaster& f, std::span<const double> window);
std::vector<double> predict_batch(const Forecaster& f, const SupervisedDataset& dataset);

}  // namespace eids

#endif  // EIDS_MODELS_HPP
