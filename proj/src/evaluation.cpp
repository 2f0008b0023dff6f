#include "eids/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace eids {

namespace {

double parse_real(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line) + ": bad number \"" + s + "\"");
    return v;
}

std::size_t parse_count(const std::string& s, std::size_t line) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("line " + std::to_string(line) + ": bad count \"" + s + "\"");
    return v;
}

void expect_header(std::istream& in, const std::string& header) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing csv header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw std::runtime_error("unexpected csv header \"" + line + "\"");
}

}  // namespace

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

ErrorMetrics compute_metrics(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) throw std::invalid_argument("compute_metrics: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("compute_metrics: empty input");
    double sq = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double r = predicted[i] - observed[i];
        sq += r * r;
        abs_sum += std::abs(r);
    }
    const double n = static_cast<double>(predicted.size());
    return {std::sqrt(sq / n), abs_sum / n};
}

MetricsReport evaluate(const Forecaster& f, const SupervisedDataset& test, const NormalizationStats& stats,
                       const ReportMeta& meta) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    const auto predicted = invert_normalization(stats, predict_batch(f, test));
    std::vector<double> observed;
    observed.reserve(test.size());
    for (const auto& p : test.pairs) observed.push_back(stats.invert(p.target));
    const auto m = compute_metrics(predicted, observed);
    return {meta.model_name, meta.structure, meta.horizon, m.rmse, m.mae, meta.iterations, meta.n_train,
            test.size(),     meta.seed};
}

PredictionTrace emit_prediction_trace(const Forecaster& f, const SupervisedDataset& train,
                                      const SupervisedDataset& test, const NormalizationStats& stats) {
    PredictionTrace trace;
    trace.rows.reserve(train.size() + test.size());
    for (const auto* part : {&train, &test}) {
        const Split split = part == &train ? Split::train : Split::test;
        const auto predicted = predict_batch(f, *part);
        for (std::size_t i = 0; i < part->size(); ++i) {
            trace.rows.push_back({part->origin_offset + i, stats.invert(part->pairs[i].target),
                                  stats.invert(predicted[i]), split});
        }
    }
    return trace;
}

void write_trace_csv(const PredictionTrace& trace, std::ostream& out) {
    out << "index,observed,predicted,split\n";
    for (const auto& r : trace.rows) {
        out << r.index << ',' << format_real(r.observed) << ',' << format_real(r.predicted) << ','
            << (r.split == Split::train ? "train" : "test") << '\n';
    }
}

PredictionTrace parse_trace_csv(std::istream& in) {
    expect_header(in, "index,observed,predicted,split");
    PredictionTrace trace;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_record(line);
        if (f.size() != 4) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 4 fields");
        TraceRow row{parse_count(f[0], line_no), parse_real(f[1], line_no), parse_real(f[2], line_no), Split::train};
        if (f[3] == "test")
            row.split = Split::test;
        else if (f[3] != "train")
            throw std::runtime_error("line " + std::to_string(line_no) + ": bad split \"" + f[3] + "\"");
        trace.rows.push_back(row);
    }
    return trace;
}

std::vector<ConvergenceRow> convergence_rows(std::span<const LabeledLog> logs) {
    std::map<std::string, std::size_t> next_iteration;
    std::vector<ConvergenceRow> rows;
    for (const auto& l : logs) {
        std::size_t& it = next_iteration[l.model];
        const std::string stage = l.log.stage_label.empty() ? "-" : l.log.stage_label;
        for (const auto& e : l.log.entries) rows.push_back({l.model, stage, ++it, e.loss});
    }
    return rows;
}

void emit_convergence_csv(std::span<const LabeledLog> logs, std::ostream& out) {
    if (logs.empty()) throw std::invalid_argument("emit_convergence_csv: no logs");
    out << "model,stage,iteration,loss\n";
    for (const auto& r : convergence_rows(logs)) {
        out << csv_field(r.model) << ',' << r.stage << ',' << r.iteration << ',' << format_real(r.loss) << '\n';
    }
}

std::vector<ConvergenceRow> parse_convergence_csv(std::istream& in) {
    expect_header(in, "model,stage,iteration,loss");
    std::vector<ConvergenceRow> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_record(line);
        if (f.size() != 4) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 4 fields");
        rows.push_back({f[0], f[1], parse_count(f[2], line_no), parse_real(f[3], line_no)});
    }
    return rows;
}

}  // namespace eids
