#ifndef EIDS_BENCH_HPP
#define EIDS_BENCH_HPP

#include "eids/evaluation.hpp"
#include "eids/models.hpp"
#include "eids/series.hpp"
#include "eids/training.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace eids::bench {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An error tagged with the pipeline stage that raised it ("load", "embed", "train", ...).
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), detail_(what) {}

    const std::string& stage() const { return stage_; }
    const std::string& detail() const { return detail_; }

private:
    std::string stage_;
    std::string detail_;
};

enum class Generator { mackey_glass, lorenz };

struct CsvSource {
    std::string path;
};

struct SyntheticSource {
    Generator generator = Generator::mackey_glass;
    double history = 1.2;
    MackeyGlassParams mackey_glass;
    LorenzParams lorenz;
    Vec3 lorenz_initial;
    Axis lorenz_axis = Axis::x;
};

/// Either a single epoch count or an EiDS stage triple.
struct IterationBudget {
    std::variant<std::size_t, EidsIterationTriple> value;

    static IterationBudget parse(const std::string& text);
    std::string format() const;
    /// Baselines take a count; EiDS accepts a triple or broadcasts a single count to all stages.
    void check_for(Family family) const;
    std::size_t epochs() const;
    EidsIterationTriple triple() const;
    std::size_t total() const;
};

struct ExperimentConfig {
    std::variant<CsvSource, SyntheticSource> data;
    double sample_period = 1.0;
    EmbeddingSpec embedding{2, 1};
    std::size_t n_train = 2500;
    std::size_t n_test = 1400;
    Family family = Family::vanilla;
    std::string structure;
    std::optional<IterationBudget> iterations;  // required for single runs; overrides every row of a preset
    std::size_t batch = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "results";
    std::optional<std::string> preset;
    std::size_t jobs = 0;  // 0 = hardware concurrency
};

/// Raw key -> value settings, keys identical to the long flag names.
using Settings = std::map<std::string, std::string>;

/// Flat "key = value" document; '#' starts a comment, blank lines are ignored.
Settings parse_config_text(std::istream& in);

/// Validates keys and values and fills documented defaults (the fig3 preset defaults train-n to 7000).
ExperimentConfig resolve_config(const Settings& settings);

/// Parses argv-style flags; `--config FILE` is read first and flags override its keys.
/// Returns nullopt when help was requested (help text is written to `help_out`).
std::optional<ExperimentConfig> load_config(const std::vector<std::string>& args, std::ostream* help_out = nullptr);

struct ExperimentResult {
    MetricsReport report;
    std::vector<LabeledLog> logs;
    PredictionTrace trace;
    double wall_seconds = 0.0;
};

/// Generates or loads the configured series with at least `pairs_needed + D * max_horizon` samples.
TimeSeries load_series(const ExperimentConfig& cfg, std::size_t max_horizon);

/// Runs embed -> split -> normalize -> build -> train -> evaluate on an already loaded series.
ExperimentResult run_pipeline(const TimeSeries& series, const ExperimentConfig& cfg);

/// Full single experiment; writes metrics.json, trace.csv and convergence.csv into cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string metrics_json(const ExperimentResult& result, const ExperimentConfig& cfg);

struct GridRow {
    Family family = Family::vanilla;
    std::string structure;
    std::size_t delta = 1;
    IterationBudget iterations{std::size_t{1}};
};

/// Built-in grids: "table1" (16 rows) and "fig3" (four families at one step ahead).
std::vector<GridRow> preset_rows(const std::string& name);

struct RowOutcome {
    GridRow row;
    std::optional<ExperimentResult> result;
    std::string error_stage;
    std::string error_message;

    bool ok() const { return result.has_value(); }
};

struct GridResult {
    std::vector<RowOutcome> rows;

    bool all_ok() const;
};

/// Runs every row against one shared series; failed rows are reported and the rest still run.
/// Writes per-row artifacts under out_dir/rows/, plus summary.csv, summary.txt and convergence.csv.
GridResult run_grid(const ExperimentConfig& base, const std::vector<GridRow>& rows);

std::string summary_csv(const GridResult& grid);
std::string summary_text(const GridResult& grid);

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace eids::bench

#endif  // EIDS_BENCH_HPP
