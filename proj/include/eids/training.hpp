#ifndef EIDS_TRAINING_HPP
#define EIDS_TRAINING_HPP

#include "eids/models.hpp"
#include "eids/nn.hpp"
#include "eids/series.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eids {

/// Raised when the training loss stops being finite.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& stage, std::size_t epoch, const std::string& what);

    const std::string& stage() const { return stage_; }
    std::size_t epoch() const { return epoch_; }

private:
    std::string stage_;
    std::size_t epoch_;
};

/// One iteration is one full pass over the training set.
struct TrainConfig {
    std::size_t iterations = 1;
    std::size_t batch_size = 32;
    nn::AdamHyper optimizer;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const;
};

struct ConvergenceEntry {
    std::size_t iteration = 0;  // 1-based
    double loss = 0.0;          // full-train MSE after the iteration

    bool operator==(const ConvergenceEntry&) const = default;
};

struct ConvergenceLog {
    std::vector<ConvergenceEntry> entries;
    std::string stage_label;  // "a" / "b" / "c" for EiDS stages, empty otherwise
};

struct EidsIterationTriple {
    std::size_t sensory = 100;
    std::size_t excitatory = 100;
    std::size_t inhibitory = 100;

    bool operator==(const EidsIterationTriple&) const = default;
};

/// Per-stage configs in the fixed order (sensory, excitatory, inhibitory).
struct StageSchedule {
    std::array<TrainConfig, 3> stages;

    /// Copies `base` into each stage with the triple's iteration counts; stage k shuffles with seed base.seed + k.
    static StageSchedule from_triple(const EidsIterationTriple& triple, const TrainConfig& base);
    EidsIterationTriple triple() const;
};

/// Which loss and which subnets a gradient or training pass targets.
///   full        baseline: (y_hat - y)^2, all parameters; EiDS: (y_b - y_c - y)^2 through every subnet
///   sensory     (y_a - y)^2 over the sensory subnet only
///   excitatory  (y_b - y)^2 over the excitatory subnet only
///   inhibitory  (y_c - (y_b - y))^2 over the inhibitory subnet only
enum class Objective { full, sensory, excitatory, inhibitory };

double loss_mse(std::span<const double> predictions, std::span<const double> targets);

/// Trains a baseline forecaster for cfg.iterations epochs; no early stopping.
ConvergenceLog train(Forecaster& f, const SupervisedDataset& train_set, const TrainConfig& cfg);

/// Trains one EiDS stage; every other subnet is left bit-identical.
ConvergenceLog train_stage(Forecaster& f, const SupervisedDataset& train_set, const TrainConfig& cfg,
                           Objective stage);

/// Runs the three stages strictly in order and returns their logs.
std::array<ConvergenceLog, 3> train_eids_staged(Forecaster& f, const SupervisedDataset& train_set,
                                                const StageSchedule& schedule);

/// Per-pair loss under the objective.
double objective_loss(const Forecaster& f, const StateVectorPair& pair, Objective objective);

/// BPTT gradients of objective_loss, one GradientSet per subnet (zeros for subnets the objective freezes).
std::vector<nn::GradientSet> objective_gradients(const Forecaster& f, const StateVectorPair& pair,
                                                 Objective objective);

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::size_t checked = 0;  // scalars compared against finite differences
    std::size_t frozen = 0;   // scalars outside the objective; their BPTT entries are exactly zero
};

GradientCheckReport gradient_check_model(const Forecaster& f, const StateVectorPair& pair, double eps = 1e-5,
                                         Objective objective = Objective::full);

}  // namespace eids

#endif  // EIDS_TRAINING_HPP
