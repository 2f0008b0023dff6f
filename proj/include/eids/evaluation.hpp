#ifndef EIDS_EVALUATION_HPP
#define EIDS_EVALUATION_HPP

#include "eids/models.hpp"
#include "eids/series.hpp"
#include "eids/training.hpp"

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace eids {

struct ErrorMetrics {
    double rmse = 0.0;
    double mae = 0.0;
};

/// Root-mean-square and mean absolute error; inputs in raw signal units.
ErrorMetrics compute_metrics(std::span<const double> predicted, std::span<const double> observed);

struct ReportMeta {
    std::string model_name;
    std::string structure;
    std::size_t horizon = 1;
    std::string iterations;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
};

struct MetricsReport {
    std::string model_name;
    std::string structure;
    std::size_t horizon = 1;
    double rmse = 0.0;
    double mae = 0.0;
    std::string iterations;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

/// Predicts the (normalized) test set and scores it after inverting normalization.
MetricsReport evaluate(const Forecaster& f, const SupervisedDataset& test, const NormalizationStats& stats,
                       const ReportMeta& meta);

enum class Split { train, test };

struct TraceRow {
    std::size_t index = 0;  // source-series index of the target
    double observed = 0.0;
    double predicted = 0.0;
    Split split = Split::train;

    bool operator==(const TraceRow&) const = default;
};

struct PredictionTrace {
    std::vector<TraceRow> rows;
};

/// Single-step predictions for every train then test pair, in raw units.
PredictionTrace emit_prediction_trace(const Forecaster& f, const SupervisedDataset& train,
                                      const SupervisedDataset& test, const NormalizationStats& stats);

void write_trace_csv(const PredictionTrace& trace, std::ostream& out);
PredictionTrace parse_trace_csv(std::istream& in);

struct LabeledLog {
    std::string model;
    ConvergenceLog log;
};

struct ConvergenceRow {
    std::string model;
    std::string stage;  // "a"/"b"/"c" for EiDS stages, "-" otherwise
    std::size_t iteration = 0;
    double loss = 0.0;

    bool operator==(const ConvergenceRow&) const = default;
};

/// Long-format rows; consecutive logs of one model continue its iteration count.
std::vector<ConvergenceRow> convergence_rows(std::span<const LabeledLog> logs);
void emit_convergence_csv(std::span<const LabeledLog> logs, std::ostream& out);
std::vector<ConvergenceRow> parse_convergence_csv(std::istream& in);

/// "%.17g" formatting, round-trip safe.
std::string format_real(double v);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);
/// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split_csv_record(const std::string& line);

}  // namespace eids

#endif  // EIDS_EVALUATION_HPP
