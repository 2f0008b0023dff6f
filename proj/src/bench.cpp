#include "eids/bench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace eids::bench {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "data",      "synthetic", "sample-period", "embed-dim", "delta",    "train-n",  "test-n",
        "model-family", "model",  "iterations",    "batch",     "lr",       "seed",     "out",
        "preset",    "jobs",      "mg-history",    "mg-beta",   "mg-gamma", "mg-tau",   "mg-exponent",
        "dt",        "lorenz-axis"};
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
    return out;
}

std::size_t to_positive(const std::string& key, const std::string& v) {
    const auto n = to_count(key, v);
    if (n < 1) throw ConfigError(key + ": must be positive");
    return n;
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a number, got \"" + v + "\"");
    return out;
}

const char* generator_key(Generator g) { return g == Generator::lorenz ? "lorenz" : "mackey-glass"; }

const char* axis_key(Axis a) {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "x";
}

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(stage, e.what());
    }
}

nlohmann::ordered_json config_echo(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    if (const auto* csv = std::get_if<CsvSource>(&cfg.data)) {
        j["data"] = csv->path;
    } else {
        const auto& syn = std::get<SyntheticSource>(cfg.data);
        j["synthetic"] = generator_key(syn.generator);
        if (syn.generator == Generator::mackey_glass) {
            j["mg-history"] = syn.history;
            j["mg-beta"] = syn.mackey_glass.beta;
            j["mg-gamma"] = syn.mackey_glass.gamma;
            j["mg-tau"] = syn.mackey_glass.tau;
            j["mg-exponent"] = syn.mackey_glass.exponent;
            j["dt"] = syn.mackey_glass.dt;
        } else {
            j["dt"] = syn.lorenz.dt;
            j["lorenz-axis"] = axis_key(syn.lorenz_axis);
        }
    }
    j["sample-period"] = cfg.sample_period;
    j["embed-dim"] = cfg.embedding.embed_dim;
    j["delta"] = cfg.embedding.horizon;
    j["train-n"] = cfg.n_train;
    j["test-n"] = cfg.n_test;
    j["model-family"] = std::string(family_key(cfg.family));
    j["model"] = cfg.structure;
    j["iterations"] = cfg.iterations ? cfg.iterations->format() : std::string();
    j["batch"] = cfg.batch;
    j["lr"] = cfg.lr;
    j["seed"] = cfg.seed;
    return j;
}

std::string trace_csv(const PredictionTrace& trace) {
    std::ostringstream ss;
    write_trace_csv(trace, ss);
    return ss.str();
}

std::string convergence_csv(const std::vector<LabeledLog>& logs) {
    std::ostringstream ss;
    emit_convergence_csv(logs, ss);
    return ss.str();
}

void write_artifacts(const std::filesystem::path& dir, const ExperimentResult& r, const ExperimentConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "metrics.json", metrics_json(r, cfg));
    write_file_atomic(dir / "trace.csv", trace_csv(r.trace));
    write_file_atomic(dir / "convergence.csv", convergence_csv(r.logs));
}

ExperimentConfig row_config(const ExperimentConfig& base, const GridRow& row) {
    ExperimentConfig cfg = base;
    cfg.family = row.family;
    cfg.structure = row.structure;
    cfg.embedding.horizon = row.delta;
    if (!base.iterations) {
        cfg.iterations = row.iterations;
    } else if (row.family == Family::eids || std::holds_alternative<std::size_t>(base.iterations->value)) {
        cfg.iterations = base.iterations;
    } else {
        throw ConfigError("an iteration triple cannot override baseline rows");
    }
    cfg.preset.reset();
    return cfg;
}

std::string row_dir_name(std::size_t index, const GridRow& row) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%02zu_%s_step%zu", index + 1, std::string(family_key(row.family)).c_str(),
                  row.delta);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// IterationBudget

IterationBudget IterationBudget::parse(const std::string& raw) {
    std::string text;
    for (char c : raw)
        if (c != ' ' && c != '\t') text += c;
    if (!text.empty() && text.front() == '(') {
        if (text.back() != ')') throw ConfigError("iterations: malformed triple \"" + raw + "\"");
        std::vector<std::size_t> nums;
        std::stringstream ss(text.substr(1, text.size() - 2));
        std::string part;
        while (std::getline(ss, part, ',')) nums.push_back(to_positive("iterations", part));
        if (nums.size() != 3) throw ConfigError("iterations: a triple needs exactly three counts");
        return {EidsIterationTriple{nums[0], nums[1], nums[2]}};
    }
    return {to_positive("iterations", text)};
}

std::string IterationBudget::format() const {
    if (const auto* n = std::get_if<std::size_t>(&value)) return std::to_string(*n);
    const auto& t = std::get<EidsIterationTriple>(value);
    return "(" + std::to_string(t.sensory) + "," + std::to_string(t.excitatory) + "," + std::to_string(t.inhibitory) +
           ")";
}

void IterationBudget::check_for(Family family) const {
    if (family != Family::eids && std::holds_alternative<EidsIterationTriple>(value))
        throw ConfigError("iterations: a stage triple only applies to the eids family");
}

std::size_t IterationBudget::epochs() const {
    if (const auto* n = std::get_if<std::size_t>(&value)) return *n;
    throw ConfigError("iterations: expected a single count");
}

EidsIterationTriple IterationBudget::triple() const {
    if (const auto* n = std::get_if<std::size_t>(&value)) return {*n, *n, *n};
    return std::get<EidsIterationTriple>(value);
}

std::size_t IterationBudget::total() const {
    if (const auto* n = std::get_if<std::size_t>(&value)) return *n;
    const auto& t = std::get<EidsIterationTriple>(value);
    return t.sensory + t.excitatory + t.inhibitory;
}

// ---------------------------------------------------------------------------
// Configuration

Settings parse_config_text(std::istream& in) {
    Settings out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto sep = line.find_first_of("= \t");
        if (sep == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": missing value");
        std::string key = trim(line.substr(0, sep));
        std::string value = trim(line.substr(sep + 1));
        if (!value.empty() && value.front() == '=') value = trim(value.substr(1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        if (!known_keys().count(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
        out[key] = value;
    }
    return out;
}

ExperimentConfig resolve_config(const Settings& s) {
    for (const auto& [k, v] : s) {
        if (!known_keys().count(k)) throw ConfigError("unknown key \"" + k + "\"");
    }
    const auto has = [&](const char* k) { return s.count(k) != 0; };
    const auto get = [&](const char* k) { return s.at(k); };

    ExperimentConfig cfg;
    if (has("data") && has("synthetic")) throw ConfigError("choose one data source: data or synthetic, not both");
    if (has("preset")) {
        cfg.preset = get("preset");
        if (*cfg.preset != "table1" && *cfg.preset != "fig3")
            throw ConfigError("preset: expected table1 or fig3, got \"" + *cfg.preset + "\"");
    }
    if (has("data")) {
        cfg.data = CsvSource{get("data")};
    } else if (has("synthetic")) {
        SyntheticSource syn;
        const auto g = get("synthetic");
        if (g == "mackey-glass")
            syn.generator = Generator::mackey_glass;
        else if (g == "lorenz")
            syn.generator = Generator::lorenz;
        else
            throw ConfigError("synthetic: expected mackey-glass or lorenz, got \"" + g + "\"");
        cfg.data = syn;
    } else if (cfg.preset) {
        cfg.data = SyntheticSource{};
    } else {
        throw ConfigError("missing data source: pass data or synthetic");
    }
    if (auto* syn = std::get_if<SyntheticSource>(&cfg.data)) {
        if (has("mg-history")) syn->history = to_real("mg-history", get("mg-history"));
        if (has("mg-beta")) syn->mackey_glass.beta = to_real("mg-beta", get("mg-beta"));
        if (has("mg-gamma")) syn->mackey_glass.gamma = to_real("mg-gamma", get("mg-gamma"));
        if (has("mg-tau")) syn->mackey_glass.tau = to_real("mg-tau", get("mg-tau"));
        if (has("mg-exponent")) syn->mackey_glass.exponent = to_real("mg-exponent", get("mg-exponent"));
        if (has("dt")) syn->mackey_glass.dt = syn->lorenz.dt = to_real("dt", get("dt"));
        if (has("lorenz-axis")) {
            const auto a = get("lorenz-axis");
            if (a == "x")
                syn->lorenz_axis = Axis::x;
            else if (a == "y")
                syn->lorenz_axis = Axis::y;
            else if (a == "z")
                syn->lorenz_axis = Axis::z;
            else
                throw ConfigError("lorenz-axis: expected x, y or z");
        }
    } else {
        for (const char* k : {"mg-history", "mg-beta", "mg-gamma", "mg-tau", "mg-exponent", "dt", "lorenz-axis"})
            if (has(k)) throw ConfigError(std::string(k) + " only applies to synthetic data");
    }

    if (has("sample-period")) {
        cfg.sample_period = to_real("sample-period", get("sample-period"));
        if (!(cfg.sample_period > 0.0)) throw ConfigError("sample-period must be positive");
    }
    if (has("embed-dim")) cfg.embedding.embed_dim = to_positive("embed-dim", get("embed-dim"));
    if (has("delta")) cfg.embedding.horizon = to_positive("delta", get("delta"));
    if (has("train-n"))
        cfg.n_train = to_positive("train-n", get("train-n"));
    else if (cfg.preset == "fig3")
        cfg.n_train = 7000;
    if (has("test-n")) cfg.n_test = to_positive("test-n", get("test-n"));
    if (has("batch")) cfg.batch = to_positive("batch", get("batch"));
    if (has("lr")) {
        cfg.lr = to_real("lr", get("lr"));
        if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
    }
    if (has("seed")) cfg.seed = to_count("seed", get("seed"));
    if (has("out")) cfg.out_dir = get("out");
    if (has("jobs")) cfg.jobs = to_count("jobs", get("jobs"));
    if (has("iterations")) cfg.iterations = IterationBudget::parse(get("iterations"));

    if (cfg.preset) {
        for (const char* k : {"model", "model-family", "delta"})
            if (has(k)) throw ConfigError(std::string(k) + " conflicts with preset (the preset fixes it per row)");
        if (cfg.iterations && std::holds_alternative<EidsIterationTriple>(cfg.iterations->value))
            throw ConfigError("iterations: a preset accepts only a single count override");
        return cfg;
    }

    if (!has("model-family")) throw ConfigError("missing model-family");
    if (!has("model")) throw ConfigError("missing model structure");
    if (!has("delta")) throw ConfigError("missing delta");
    if (!cfg.iterations) throw ConfigError("missing iterations");
    try {
        cfg.family = parse_family(get("model-family"));
        cfg.structure = get("model");
        parse_model_spec(cfg.structure, cfg.family);
    } catch (const ModelSpecError& e) {
        throw ConfigError(e.what());
    }
    cfg.iterations->check_for(cfg.family);
    return cfg;
}

std::optional<ExperimentConfig> load_config(const std::vector<std::string>& args, std::ostream* help_out) {
    CLI::App app{"Recurrent forecaster benchmark: EiDS and LSTM baselines on embedded time series", "eids-bench"};
    app.allow_extras(false);

    std::map<std::string, std::string> flags;
    std::string config_path;
    std::vector<std::string> model_args;
    app.add_option("--config", config_path, "Flat key = value file; keys are the long flag names");

    const auto opt = [&](const std::string& key, const std::string& help) {
        return app.add_option_function<std::string>(
            "--" + key, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    opt("data", "CSV file, one sample per line (optional header)");
    opt("synthetic", "Synthetic source: mackey-glass | lorenz");
    opt("sample-period", "Milliseconds per sample (metadata)");
    opt("embed-dim", "Embedding dimension D (default 2)");
    opt("delta", "Horizon / lag spacing in samples");
    opt("train-n", "Training pairs (default 2500; fig3 7000)");
    opt("test-n", "Test pairs (default 1400)");
    opt("model-family", "vanilla | stacked | bidirectional | eids");
    app.add_option("--model", model_args, "Structure, e.g. \"(1,14)\"; or FAMILY STRUCTURE")->expected(1, 2);
    opt("iterations", "Epochs, or \"(a,b,c)\" for EiDS stages");
    opt("batch", "Mini-batch size (default 32)");
    opt("lr", "Adam learning rate (default 1e-3)");
    opt("seed", "Seed (default 1)");
    opt("out", "Output directory (default results)");
    opt("preset", "table1 | fig3");
    opt("jobs", "Parallel grid rows (default: hardware threads)");
    opt("mg-history", "Mackey-Glass constant history (default 1.2)");
    opt("mg-beta", "Mackey-Glass beta (default 0.2)");
    opt("mg-gamma", "Mackey-Glass gamma (default 0.1)");
    opt("mg-tau", "Mackey-Glass delay (default 17)");
    opt("mg-exponent", "Mackey-Glass exponent (default 10)");
    opt("dt", "Integration step (Mackey-Glass 1, Lorenz 0.01)");
    opt("lorenz-axis", "Lorenz component: x | y | z");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        if (help_out) *help_out << app.help();
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }
    if (model_args.size() == 2) {
        flags["model-family"] = model_args[0];
        flags["model"] = model_args[1];
    } else if (model_args.size() == 1) {
        flags["model"] = model_args[0];
    }

    Settings merged;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file " + config_path);
        merged = parse_config_text(in);
    }
    for (const auto& [k, v] : flags) {
        // A source given on the command line replaces the file's source.
        if (k == "data") merged.erase("synthetic");
        if (k == "synthetic") merged.erase("data");
        merged[k] = v;
    }
    if (flags.count("data") && flags.count("synthetic"))
        throw ConfigError("choose one data source: --data or --synthetic, not both");
    return resolve_config(merged);
}

// ---------------------------------------------------------------------------
// Pipeline

TimeSeries load_series(const ExperimentConfig& cfg, std::size_t max_horizon) {
    return staged("load", [&] {
        if (const auto* csv = std::get_if<CsvSource>(&cfg.data)) return load_csv_file(csv->path, cfg.sample_period);
        const auto& syn = std::get<SyntheticSource>(cfg.data);
        const std::size_t n = cfg.n_train + cfg.n_test + cfg.embedding.embed_dim * max_horizon;
        TimeSeries raw = syn.generator == Generator::mackey_glass
                             ? generate_mackey_glass(n, syn.history, syn.mackey_glass)
                             : generate_lorenz(n, syn.lorenz_initial, syn.lorenz, syn.lorenz_axis);
        const std::vector<double> values(raw.values().begin(), raw.values().end());
        return TimeSeries(values, cfg.sample_period, raw.label());
    });
}

ExperimentResult run_pipeline(const TimeSeries& series, const ExperimentConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    if (!cfg.iterations) throw PipelineError("config", "missing iterations");
    const auto dataset = staged("embed", [&] { return embed(series, cfg.embedding); });
    const auto [train_raw, test_raw] =
        staged("split", [&] { return split_train_test(dataset, cfg.n_train, cfg.n_test); });
    const auto stats = staged("normalize", [&] { return fit_normalizer(train_raw); });
    const auto train_set = normalize(train_raw, stats);
    const auto test_set = normalize(test_raw, stats);

    Forecaster model = staged("build", [&] {
        cfg.iterations->check_for(cfg.family);
        nn::Prng rng(cfg.seed);
        return build_forecaster(parse_model_spec(cfg.structure, cfg.family), cfg.embedding.embed_dim, rng);
    });

    TrainConfig tc;
    tc.batch_size = cfg.batch;
    tc.optimizer.lr = cfg.lr;
    tc.seed = cfg.seed;
    const std::string label(family_display_name(cfg.family));
    ExperimentResult result;
    staged("train", [&] {
        if (model.is_eids()) {
            const auto logs = train_eids_staged(model, train_set, StageSchedule::from_triple(cfg.iterations->triple(), tc));
            for (const auto& l : logs) result.logs.push_back({label, l});
        } else {
            tc.iterations = cfg.iterations->epochs();
            result.logs.push_back({label, train(model, train_set, tc)});
        }
    });

    ReportMeta meta{label, cfg.structure, cfg.embedding.horizon, cfg.iterations->format(), cfg.n_train, cfg.seed};
    result.report = staged("evaluate", [&] { return evaluate(model, test_set, stats, meta); });
    result.trace = staged("evaluate", [&] { return emit_prediction_trace(model, train_set, test_set, stats); });
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto series = load_series(cfg, cfg.embedding.horizon);
    auto result = run_pipeline(series, cfg);
    staged("emit", [&] { write_artifacts(cfg.out_dir, result, cfg); });
    return result;
}

std::string metrics_json(const ExperimentResult& result, const ExperimentConfig& cfg) {
    const auto& r = result.report;
    nlohmann::ordered_json j;
    j["model_name"] = r.model_name;
    j["structure"] = r.structure;
    j["horizon"] = r.horizon;
    j["rmse"] = r.rmse;
    j["mae"] = r.mae;
    j["iterations"] = r.iterations;
    j["n_train"] = r.n_train;
    j["n_test"] = r.n_test;
    j["seed"] = r.seed;
    j["config"] = config_echo(cfg);
    j["wall_clock_seconds"] = result.wall_seconds;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Grid

std::vector<GridRow> preset_rows(const std::string& name) {
    const auto row = [](Family f, const char* structure, std::size_t delta, const char* iterations) {
        return GridRow{f, structure, delta, IterationBudget::parse(iterations)};
    };
    using F = Family;
    if (name == "table1") {
        return {
            row(F::vanilla, "(1,14)", 1, "1000"),
            row(F::vanilla, "(1,15)", 5, "1000"),
            row(F::vanilla, "(1,20)", 50, "2000"),
            row(F::vanilla, "(1,20)", 75, "1000"),
            row(F::stacked, "(3,9,8,3)", 1, "1000"),
            row(F::stacked, "(3,15-8-5)", 5, "500"),
            row(F::stacked, "(3, 15-8-5)", 50, "500"),
            row(F::stacked, "(3, 20,4,2)", 75, "500"),
            row(F::bidirectional, "(1,28)", 1, "1000"),
            row(F::bidirectional, "(1,28)", 5, "500"),
            row(F::bidirectional, "(1,28)", 50, "500"),
            row(F::bidirectional, "(1,28)", 75, "500"),
            row(F::eids, "((1,6),(1,5),(1,7))", 1, "(100,150,400)"),
            row(F::eids, "((1,6),(1,5),(1,8))", 5, "(100,100,100)"),
            row(F::eids, "((1,6),(1,5),(1,8))", 50, "(100,100,100)"),
            row(F::eids, "((1,6),(1,5),(1,8))", 75, "(100,100,100)"),
        };
    }
    if (name == "fig3") {
        return {
            row(F::vanilla, "(1,14)", 1, "1000"),
            row(F::stacked, "(3,9,8,3)", 1, "1000"),
            row(F::bidirectional, "(1,28)", 1, "1000"),
            row(F::eids, "((1,6),(1,5),(1,7))", 1, "(100,150,400)"),
        };
    }
    throw ConfigError("unknown preset \"" + name + "\"");
}

bool GridResult::all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const RowOutcome& r) { return r.ok(); });
}

GridResult run_grid(const ExperimentConfig& base, const std::vector<GridRow>& rows) {
    GridResult grid;
    grid.rows.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) grid.rows[i].row = rows[i];
    if (rows.empty()) return grid;

    std::size_t max_delta = 0;
    for (const auto& r : rows) max_delta = std::max(max_delta, r.delta);

    std::optional<TimeSeries> series;
    try {
        series = load_series(base, max_delta);
    } catch (const PipelineError& e) {
        for (auto& r : grid.rows) {
            r.error_stage = e.stage();
            r.error_message = e.detail();
        }
        return grid;
    }

    const auto run_row = [&](std::size_t i) {
        RowOutcome& out = grid.rows[i];
        try {
            const auto cfg = row_config(base, rows[i]);
            auto result = run_pipeline(*series, cfg);
            staged("emit", [&] { write_artifacts(base.out_dir / "rows" / row_dir_name(i, rows[i]), result, cfg); });
            out.result = std::move(result);
        } catch (const PipelineError& e) {
            out.error_stage = e.stage();
            out.error_message = e.detail();
        } catch (const std::exception& e) {
            out.error_stage = "config";
            out.error_message = e.what();
        }
    };

    std::size_t jobs = base.jobs ? base.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, rows.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) run_row(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < rows.size(); i = next++) run_row(i);
            });
        }
    }

    // Combined convergence curves; labels gain the step when a model name repeats.
    std::map<std::string, std::size_t> name_uses;
    for (const auto& r : rows) ++name_uses[std::string(family_display_name(r.family))];
    std::vector<LabeledLog> combined;
    for (const auto& r : grid.rows) {
        if (!r.ok()) continue;
        for (auto l : r.result->logs) {
            if (name_uses[l.model] > 1) l.model += " step=" + std::to_string(r.row.delta);
            combined.push_back(std::move(l));
        }
    }
    std::filesystem::create_directories(base.out_dir);
    write_file_atomic(base.out_dir / "summary.csv", summary_csv(grid));
    write_file_atomic(base.out_dir / "summary.txt", summary_text(grid));
    if (!combined.empty()) write_file_atomic(base.out_dir / "convergence.csv", convergence_csv(combined));
    return grid;
}

std::string summary_csv(const GridResult& grid) {
    std::ostringstream ss;
    ss << "Model's Name,Model's Structure,Steps,RMSE,MAE,No.Iterations\n";
    for (const auto& r : grid.rows) {
        ss << csv_field(std::string(family_display_name(r.row.family))) << ',' << csv_field(r.row.structure) << ','
           << r.row.delta << ',';
        if (r.ok())
            ss << format_real(r.result->report.rmse) << ',' << format_real(r.result->report.mae) << ','
               << csv_field(r.result->report.iterations);
        else
            ss << "failed,failed," << csv_field(r.row.iterations.format());
        ss << '\n';
    }
    return ss.str();
}

std::string summary_text(const GridResult& grid) {
    std::vector<std::array<std::string, 6>> cells;
    cells.push_back({"Model's Name", "Model's Structure", "Steps", "RMSE", "MAE", "No.Iterations"});
    for (const auto& r : grid.rows) {
        std::array<std::string, 6> row{std::string(family_display_name(r.row.family)), r.row.structure,
                                       std::to_string(r.row.delta), "failed", "failed", r.row.iterations.format()};
        if (r.ok()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", r.result->report.rmse);
            row[3] = buf;
            std::snprintf(buf, sizeof buf, "%.4f", r.result->report.mae);
            row[4] = buf;
            row[5] = r.result->report.iterations;
        }
        cells.push_back(std::move(row));
    }
    std::array<std::size_t, 6> width{};
    for (const auto& row : cells)
        for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream ss;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < 6; ++c) {
            ss << row[c];
            if (c + 1 < 6) ss << std::string(width[c] - row[c].size() + 2, ' ');
        }
        ss << '\n';
    }
    for (std::size_t i = 0; i < grid.rows.size(); ++i) {
        const auto& r = grid.rows[i];
        if (!r.ok()) ss << "row " << i + 1 << " failed at " << r.error_stage << ": " << r.error_message << '\n';
    }
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace eids::bench
