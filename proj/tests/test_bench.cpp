#include <doctest.h>

#include "eids/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using namespace eids;
using namespace eids::bench;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("eids_test_bench_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// metrics.json without the timing field.
nlohmann::ordered_json metrics_sans_timing(const fs::path& p) {
    auto j = nlohmann::ordered_json::parse(slurp(p));
    j.erase("wall_clock_seconds");
    return j;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig small(Family family, const std::string& structure, const std::string& iterations,
                       const fs::path& out) {
    ExperimentConfig cfg;
    cfg.data = SyntheticSource{};
    cfg.n_train = 120;
    cfg.n_test = 60;
    cfg.family = family;
    cfg.structure = structure;
    cfg.iterations = IterationBudget::parse(iterations);
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("flags only, with defaults filled") {
    const auto cfg = load_config(
        {"--synthetic", "mackey-glass", "--delta", "1", "--model", "vanilla", "(1,14)", "--iterations", "1000"});
    REQUIRE(cfg.has_value());
    CHECK(std::holds_alternative<SyntheticSource>(cfg->data));
    CHECK(cfg->family == Family::vanilla);
    CHECK(cfg->structure == "(1,14)");
    CHECK(cfg->embedding.embed_dim == 2);
    CHECK(cfg->embedding.horizon == 1);
    CHECK(cfg->batch == 32);
    CHECK(cfg->lr == 1e-3);
    CHECK(cfg->seed == 1);
    CHECK(cfg->n_train == 2500);
    CHECK(cfg->n_test == 1400);
    CHECK(cfg->iterations->epochs() == 1000);

    const auto split = load_config({"--synthetic", "lorenz", "--delta", "5", "--model-family", "eids", "--model",
                                    "((1,6),(1,5),(1,8))", "--iterations", "(100,100,100)"});
    REQUIRE(split.has_value());
    CHECK(split->family == Family::eids);
    CHECK(split->iterations->triple() == EidsIterationTriple{100, 100, 100});
    CHECK(std::get<SyntheticSource>(split->data).generator == Generator::lorenz);
}

TEST_CASE("flags override the config file") {
    const auto dir = scratch("config");
    {
        std::ofstream f(dir / "run.cfg");
        f << "# comment\nsynthetic = mackey-glass\nseed = 7\ndelta 5\nmodel-family = stacked\n"
             "model = (3,9,8,3)\niterations = 20\n";
    }
    const auto a = load_config({"--config", (dir / "run.cfg").string()});
    REQUIRE(a.has_value());
    CHECK(a->seed == 7);
    CHECK(a->embedding.horizon == 5);

    const auto b = load_config({"--config", (dir / "run.cfg").string(), "--seed", "9"});
    REQUIRE(b.has_value());
    CHECK(b->seed == 9);
    CHECK(b->family == Family::stacked);

    const auto c = load_config({"--config", (dir / "run.cfg").string(), "--data", "series.csv"});
    REQUIRE(c.has_value());
    CHECK(std::get<CsvSource>(c->data).path == "series.csv");
    fs::remove_all(dir);
}

TEST_CASE("config errors") {
    const std::vector<std::string> model = {"--delta", "1", "--model", "vanilla", "(1,14)", "--iterations", "10"};
    auto with = [&](std::vector<std::string> extra) {
        extra.insert(extra.end(), model.begin(), model.end());
        return extra;
    };
    CHECK_THROWS_AS(load_config(with({"--data", "x.csv", "--synthetic", "mackey-glass"})), ConfigError);
    CHECK_THROWS_AS(load_config({"--synthetic", "mackey-glass", "--model", "vanilla", "(1,14)"}), ConfigError);
    CHECK_THROWS_AS(load_config(with({"--synthetic", "mackey-glass", "--train-n", "0"})), ConfigError);
    CHECK_THROWS_AS(load_config(with({"--synthetic", "henon"})), ConfigError);
    CHECK_THROWS_AS(load_config({"--synthetic", "mackey-glass", "--delta", "1", "--model", "vanilla", "(1,14)",
                                 "--iterations", "(1,2,3)"}),
                    ConfigError);
    CHECK_THROWS_AS(load_config({"--preset", "table1", "--model", "vanilla", "(1,14)"}), ConfigError);
    CHECK_THROWS_AS(load_config({"--preset", "table9"}), ConfigError);

    std::istringstream unknown("synthetic = mackey-glass\nwarmup = 3\n");
    CHECK_THROWS_WITH_AS(parse_config_text(unknown), doctest::Contains("warmup"), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"synthetic", "mackey-glass"}, {"warmup", "3"}}), ConfigError);
}

TEST_CASE("presets resolve with their documented defaults") {
    const auto t = load_config({"--preset", "table1"});
    REQUIRE(t.has_value());
    CHECK(t->n_train == 2500);
    CHECK(std::holds_alternative<SyntheticSource>(t->data));
    const auto f = load_config({"--preset", "fig3"});
    REQUIRE(f.has_value());
    CHECK(f->n_train == 7000);
    CHECK(f->n_test == 1400);
    const auto g = load_config({"--preset", "fig3", "--train-n", "300", "--iterations", "2"});
    CHECK(g->n_train == 300);
    CHECK(g->iterations->epochs() == 2);
}

TEST_CASE("iteration budgets") {
    CHECK(IterationBudget::parse("1000").epochs() == 1000);
    CHECK(IterationBudget::parse("(100,150,400)").triple() == EidsIterationTriple{100, 150, 400});
    CHECK(IterationBudget::parse("(100,150,400)").total() == 650);
    CHECK(IterationBudget::parse(" ( 100 , 150 , 400 ) ").format() == "(100,150,400)");
    CHECK(IterationBudget::parse("7").triple() == EidsIterationTriple{7, 7, 7});
    CHECK_THROWS_AS(IterationBudget::parse("0"), ConfigError);
    CHECK_THROWS_AS(IterationBudget::parse("(1,2)"), ConfigError);
    CHECK_THROWS_AS(IterationBudget::parse("ten"), ConfigError);
    CHECK_THROWS_AS(IterationBudget::parse("(1,2,3)").check_for(Family::stacked), ConfigError);
}

TEST_CASE("table1 preset rows") {
    const auto rows = preset_rows("table1");
    REQUIRE(rows.size() == 16);
    const std::size_t deltas[] = {1, 5, 50, 75};
    const char* vanilla[] = {"(1,14)", "(1,15)", "(1,20)", "(1,20)"};
    const char* vanilla_iter[] = {"1000", "1000", "2000", "1000"};
    const char* stacked[] = {"(3,9,8,3)", "(3,15-8-5)", "(3, 15-8-5)", "(3, 20,4,2)"};
    const char* stacked_iter[] = {"1000", "500", "500", "500"};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rows[i].family == Family::vanilla);
        CHECK(rows[i].structure == vanilla[i]);
        CHECK(rows[i].iterations.format() == vanilla_iter[i]);
        CHECK(rows[4 + i].family == Family::stacked);
        CHECK(rows[4 + i].structure == stacked[i]);
        CHECK(rows[4 + i].iterations.format() == stacked_iter[i]);
        CHECK(rows[8 + i].family == Family::bidirectional);
        CHECK(rows[8 + i].structure == "(1,28)");
        CHECK(rows[8 + i].iterations.format() == (i == 0 ? "1000" : "500"));
        CHECK(rows[12 + i].family == Family::eids);
        CHECK(rows[12 + i].structure == (i == 0 ? "((1,6),(1,5),(1,7))" : "((1,6),(1,5),(1,8))"));
        CHECK(rows[12 + i].iterations.format() == (i == 0 ? "(100,150,400)" : "(100,100,100)"));
        for (std::size_t f = 0; f < 4; ++f) CHECK(rows[4 * f + i].delta == deltas[i]);
    }
    for (const auto& r : rows) CHECK_NOTHROW(parse_model_spec(r.structure, r.family));

    const auto fig3 = preset_rows("fig3");
    REQUIRE(fig3.size() == 4);
    for (const auto& r : fig3) CHECK(r.delta == 1);
}

TEST_CASE("run_experiment writes the three artifacts") {
    const auto dir = scratch("vanilla");
    const auto cfg = small(Family::vanilla, "(1,4)", "5", dir / "out");
    const auto result = run_experiment(cfg);
    CHECK(std::isfinite(result.report.rmse));
    CHECK(std::isfinite(result.report.mae));

    const auto j = nlohmann::ordered_json::parse(slurp(dir / "out" / "metrics.json"));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"model_name", "structure", "horizon", "rmse", "mae", "iterations",
                                           "n_train", "n_test", "seed", "config", "wall_clock_seconds"});
    CHECK(j["model_name"] == "Vanilla LSTM");
    CHECK(j["n_test"] == 60);

    CHECK(count_lines(slurp(dir / "out" / "convergence.csv")) == 1 + 5);
    CHECK(count_lines(slurp(dir / "out" / "trace.csv")) == 1 + 180);
    fs::remove_all(dir);
}

TEST_CASE("EiDS run logs one row per stage epoch and is byte-reproducible") {
    const auto dir = scratch("eids");
    const auto cfg = small(Family::eids, "((1,6),(1,5),(1,8))", "(100,100,100)", dir / "a");
    run_experiment(cfg);
    const auto conv = slurp(dir / "a" / "convergence.csv");
    CHECK(count_lines(conv) == 1 + 300);

    auto again = cfg;
    again.out_dir = dir / "b";
    run_experiment(again);
    CHECK(slurp(dir / "b" / "convergence.csv") == conv);
    CHECK(slurp(dir / "b" / "trace.csv") == slurp(dir / "a" / "trace.csv"));
    CHECK(metrics_sans_timing(dir / "b" / "metrics.json") == metrics_sans_timing(dir / "a" / "metrics.json"));
    fs::remove_all(dir);
}

TEST_CASE("a one-row grid reproduces run_experiment") {
    const auto dir = scratch("grid");
    auto cfg = small(Family::stacked, "(2,4,3)", "4", dir / "single");
    cfg.embedding.horizon = 3;
    run_experiment(cfg);

    auto base = cfg;
    base.out_dir = dir / "grid";
    const GridRow row{Family::stacked, "(2,4,3)", 3, IterationBudget::parse("4")};
    const auto grid = run_grid(base, {row});
    REQUIRE(grid.all_ok());
    const auto row_dir = dir / "grid" / "rows" / "01_stacked_step3";
    CHECK(slurp(row_dir / "trace.csv") == slurp(dir / "single" / "trace.csv"));
    CHECK(slurp(row_dir / "convergence.csv") == slurp(dir / "single" / "convergence.csv"));
    CHECK(metrics_sans_timing(row_dir / "metrics.json") == metrics_sans_timing(dir / "single" / "metrics.json"));

    const auto summary = slurp(dir / "grid" / "summary.csv");
    CHECK(summary.rfind("Model's Name,Model's Structure,Steps,RMSE,MAE,No.Iterations\n", 0) == 0);
    CHECK(count_lines(summary) == 2);
    fs::remove_all(dir);
}

TEST_CASE("a failing grid row is reported and the others still run") {
    const auto dir = scratch("failing");
    auto base = small(Family::vanilla, "(1,2)", "2", dir);
    base.iterations.reset();
    base.n_train = 60;
    base.n_test = 20;
    const std::vector<GridRow> rows = {{Family::vanilla, "(1,2)", 1, IterationBudget::parse("2")},
                                       {Family::stacked, "(3,2,2)", 1, IterationBudget::parse("2")},
                                       {Family::bidirectional, "(1,2)", 2, IterationBudget::parse("2")}};
    const auto grid = run_grid(base, rows);
    CHECK_FALSE(grid.all_ok());
    CHECK(grid.rows[0].ok());
    CHECK_FALSE(grid.rows[1].ok());
    CHECK(grid.rows[1].error_stage == "build");
    CHECK(grid.rows[2].ok());
    CHECK(slurp(dir / "summary.csv").find("failed") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("pipeline errors carry their stage") {
    const auto dir = scratch("missing");
    auto cfg = small(Family::vanilla, "(1,2)", "2", dir);
    cfg.data = CsvSource{(dir / "absent.csv").string()};
    try {
        run_experiment(cfg);
        FAIL("expected a load failure");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == "load");
    }

    {
        std::ofstream f(dir / "short.csv");
        f << "v\n1\n2\n3\n4\n";
    }
    cfg.data = CsvSource{(dir / "short.csv").string()};
    try {
        run_experiment(cfg);
        FAIL("expected an embed or split failure");
    } catch (const PipelineError& e) {
        CHECK((e.stage() == "split" || e.stage() == "embed"));
    }
    fs::remove_all(dir);
}

TEST_CASE("write_file_atomic replaces content") {
    const auto dir = scratch("atomic");
    write_file_atomic(dir / "f.txt", "one");
    write_file_atomic(dir / "f.txt", "two");
    CHECK(slurp(dir / "f.txt") == "two");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    fs::remove_all(dir);
}
