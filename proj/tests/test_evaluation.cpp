#include <doctest.h>

#include "eids/evaluation.hpp"

#include <cmath>
#include <sstream>

using namespace eids;

namespace {

// A vanilla model whose output is the constant `value` regardless of input.
Forecaster constant_model(double value) {
    nn::Prng rng(1);
    auto f = build_forecaster(parse_model_spec("(1,2)", Family::vanilla), 2, rng);
    for (double& w : f.subnets[0].readout.weights) w = 0.0;
    f.subnets[0].readout.bias = value;
    return f;
}

SupervisedDataset pairs_with_targets(const std::vector<double>& targets, std::size_t origin) {
    SupervisedDataset ds;
    ds.spec = {2, 1};
    ds.origin_offset = origin;
    for (double t : targets) ds.pairs.push_back({{0.1, 0.2}, t});
    return ds;
}

LabeledLog make_log(const std::string& model, const std::string& stage, std::size_t n, double start) {
    LabeledLog l;
    l.model = model;
    l.log.stage_label = stage;
    for (std::size_t i = 1; i <= n; ++i) l.log.entries.push_back({i, start / static_cast<double>(i)});
    return l;
}

}  // namespace

TEST_CASE("compute_metrics hand values") {
    const std::vector<double> zero = {0, 0}, obs = {3, 4};
    const auto m = compute_metrics(zero, obs);
    CHECK(m.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(m.rmse == doctest::Approx(3.53553).epsilon(1e-6));
    CHECK(m.mae == 3.5);

    const auto same = compute_metrics(obs, obs);
    CHECK(same.rmse == 0.0);
    CHECK(same.mae == 0.0);

    CHECK_THROWS(compute_metrics(std::vector<double>{}, std::vector<double>{}));
    CHECK_THROWS(compute_metrics(zero, std::vector<double>{1}));
}

TEST_CASE("rmse is never below mae") {
    nn::Prng rng(8);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<double> p(n), o(n);
        for (std::size_t k = 0; k < n; ++k) {
            p[k] = rng.uniform(-10, 10);
            o[k] = rng.uniform(-10, 10);
        }
        const auto m = compute_metrics(p, o);
        CHECK(m.rmse >= m.mae);
    }
}

TEST_CASE("evaluate scores in raw units and echoes the meta") {
    const ReportMeta meta{"Vanilla LSTM", "(1,14)", 5, "1000", 2500, 42};

    SUBCASE("zero output against raw targets 3 and 4") {
        const auto report = evaluate(constant_model(0.0), pairs_with_targets({3, 4}, 10), {0.0, 1.0}, meta);
        CHECK(report.rmse == doctest::Approx(3.53553).epsilon(1e-6));
        CHECK(report.mae == 3.5);
        CHECK(report.n_test == 2);
        CHECK(report.model_name == "Vanilla LSTM");
        CHECK(report.structure == "(1,14)");
        CHECK(report.horizon == 5);
        CHECK(report.iterations == "1000");
        CHECK(report.n_train == 2500);
        CHECK(report.seed == 42);
    }
    SUBCASE("a stub that hits every normalized target scores zero") {
        const NormalizationStats stats{2.0, 4.0};
        const auto report = evaluate(constant_model(0.25), pairs_with_targets({0.25, 0.25, 0.25}, 0), stats, meta);
        CHECK(report.rmse == 0.0);
        CHECK(report.mae == 0.0);
    }
    SUBCASE("normalization is inverted before scoring") {
        const NormalizationStats stats{10.0, 2.0};
        const auto report = evaluate(constant_model(0.0), pairs_with_targets({1.0, -1.0}, 0), stats, meta);
        CHECK(report.rmse == 2.0);
        CHECK(report.mae == 2.0);
    }
}

TEST_CASE("prediction trace rows, splits and indices") {
    const auto f = constant_model(0.5);
    const NormalizationStats stats{1.0, 2.0};
    std::vector<double> tr(2500, 0.0), te(1400, 1.0);
    const auto train = pairs_with_targets(tr, 2);
    const auto test = pairs_with_targets(te, 2502);
    const auto trace = emit_prediction_trace(f, train, test, stats);
    REQUIRE(trace.rows.size() == 3900);
    for (std::size_t i = 0; i < 3900; ++i) {
        CHECK(trace.rows[i].split == (i < 2500 ? Split::train : Split::test));
        CHECK(trace.rows[i].index == 2 + i);
        CHECK(trace.rows[i].predicted == 2.0);
    }
    CHECK(trace.rows[0].observed == 1.0);
    CHECK(trace.rows[2500].observed == 3.0);

    const auto only_train = emit_prediction_trace(f, train, pairs_with_targets({}, 2502), stats);
    CHECK(only_train.rows.size() == 2500);
}

TEST_CASE("trace CSV round trip") {
    nn::Prng rng(4);
    PredictionTrace trace;
    for (std::size_t i = 0; i < 200; ++i)
        trace.rows.push_back({i + 3, rng.uniform(-1e3, 1e3), rng.uniform(-1e-7, 1e-7), i < 150 ? Split::train : Split::test});
    std::ostringstream out;
    write_trace_csv(trace, out);
    CHECK(out.str().rfind("index,observed,predicted,split\n", 0) == 0);
    std::istringstream in(out.str());
    CHECK(parse_trace_csv(in).rows == trace.rows);

    std::istringstream bad("index,observed,predicted,split\n1,2,3,validation\n");
    CHECK_THROWS(parse_trace_csv(bad));
}

TEST_CASE("convergence rows continue the iteration count across stages") {
    const LabeledLog logs[] = {make_log("EiDS", "a", 100, 1.0), make_log("EiDS", "b", 150, 2.0),
                               make_log("EiDS", "c", 400, 3.0), make_log("Vanilla LSTM", "", 3, 1.0)};
    const auto rows = convergence_rows(logs);
    REQUIRE(rows.size() == 653);
    for (std::size_t i = 0; i < 650; ++i) {
        CHECK(rows[i].model == "EiDS");
        CHECK(rows[i].iteration == i + 1);
    }
    CHECK(rows[0].stage == "a");
    CHECK(rows[100].stage == "b");
    CHECK(rows[100].loss == 2.0);
    CHECK(rows[250].stage == "c");
    CHECK(rows[650].model == "Vanilla LSTM");
    CHECK(rows[650].stage == "-");
    CHECK(rows[650].iteration == 1);
    CHECK(rows[652].iteration == 3);
}

TEST_CASE("convergence CSV round trip") {
    const LabeledLog logs[] = {make_log("Stacked LSTM step=5", "", 7, 0.3), make_log("EiDS, variant", "a", 4, 1.0 / 3)};
    std::ostringstream out;
    emit_convergence_csv(logs, out);
    CHECK(out.str().rfind("model,stage,iteration,loss\n", 0) == 0);
    std::istringstream in(out.str());
    CHECK(parse_convergence_csv(in) == convergence_rows(logs));
}

TEST_CASE("csv helpers") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(split_csv_record("\"(3, 15-8-5)\",x,\"q\"\"q\"") == std::vector<std::string>{"(3, 15-8-5)", "x", "q\"q"});
    CHECK(std::stod(format_real(0.1)) == 0.1);
    CHECK(format_real(2.0) == "2");
}
