#include <doctest.h>

#include "eids/models.hpp"

#include <cmath>
#include <string>

using namespace eids;

namespace {

struct TableRow {
    Family family;
    const char* structure;
};

const TableRow kTableRows[] = {
    {Family::vanilla, "(1,14)"},
    {Family::vanilla, "(1,15)"},
    {Family::vanilla, "(1,20)"},
    {Family::stacked, "(3,9,8,3)"},
    {Family::stacked, "(3,15-8-5)"},
    {Family::stacked, "(3, 15-8-5)"},
    {Family::stacked, "(3, 20,4,2)"},
    {Family::bidirectional, "(1,28)"},
    {Family::eids, "((1,6),(1,5),(1,7))_5"},
    {Family::eids, "((1,6),(1,5),(1,8))"},
};

// 4h(in + h + 1) per layer, plus one readout over the final features.
std::size_t count_by_hand(const std::vector<std::pair<std::size_t, std::size_t>>& layers, std::size_t features) {
    std::size_t n = 0;
    for (auto [in, h] : layers) n += 4 * h * (in + h + 1);
    return n + features + 1;
}

std::size_t allocated(const Forecaster& f) {
    std::size_t n = 0;
    for (const auto& s : f.subnets) {
        for (const auto& l : s.layers) n += l.w_input.data().size() + l.w_recurrent.data().size() + l.bias.size();
        n += s.readout.weights.size() + 1;
    }
    return n;
}

Forecaster make(const char* text, Family family, std::size_t D, std::uint64_t seed) {
    nn::Prng rng(seed);
    return build_forecaster(parse_model_spec(text, family), D, rng);
}

}  // namespace

TEST_CASE("parse_model_spec examples") {
    CHECK(parse_model_spec("(1,14)", Family::vanilla) == ModelSpec{VanillaSpec{14}});
    CHECK(parse_model_spec("(3,9,8,3)", Family::stacked) == ModelSpec{StackedSpec{{9, 8, 3}}});
    CHECK(parse_model_spec("(3,15-8-5)", Family::stacked) == ModelSpec{StackedSpec{{15, 8, 5}}});
    CHECK(parse_model_spec(" ( 3, 20,4,2 ) ", Family::stacked) == ModelSpec{StackedSpec{{20, 4, 2}}});
    CHECK(parse_model_spec("(1,28)", Family::bidirectional) == ModelSpec{BidirectionalSpec{28}});
    CHECK(parse_model_spec("((1,6),(1,5),(1,8))", Family::eids) == ModelSpec{EidsSpec{{1, 6}, {1, 5}, {1, 8}}});
    CHECK(parse_model_spec("((1,6),(1,5),(1,7))_5", Family::eids) == ModelSpec{EidsSpec{{1, 6}, {1, 5}, {1, 7}}});
    CHECK(parse_model_spec("((2,6),(1,5),(3,7))", Family::eids).family() == Family::eids);
}

TEST_CASE("parse_model_spec errors") {
    CHECK_THROWS_AS(parse_model_spec("(3,9,8)", Family::stacked), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(2,14)", Family::vanilla), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(2,28)", Family::bidirectional), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(1,0)", Family::vanilla), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(1,14", Family::vanilla), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("1,14", Family::vanilla), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(1,x)", Family::vanilla), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("((1,6),(1,5))", Family::eids), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("(1,14)", Family::eids), ModelSpecError);
    CHECK_THROWS_AS(parse_model_spec("", Family::stacked), ModelSpecError);
    CHECK_THROWS_AS(parse_family("gru"), ModelSpecError);
}

TEST_CASE("family names") {
    for (auto f : {Family::vanilla, Family::stacked, Family::bidirectional, Family::eids})
        CHECK(parse_family(family_key(f)) == f);
    CHECK(family_display_name(Family::bidirectional) == "Bidirectional LSTM");
    CHECK(family_display_name(Family::eids) == "EiDS");
}

TEST_CASE("format then parse round-trips every table spec") {
    for (const auto& row : kTableRows) {
        const auto spec = parse_model_spec(row.structure, row.family);
        CHECK(parse_model_spec(format_model_spec(spec), row.family) == spec);
    }
    CHECK(format_model_spec(parse_model_spec("(3,15-8-5)", Family::stacked)) == "(3,15,8,5)");
    CHECK(format_model_spec(parse_model_spec("((1,6),(1,5),(1,7))_5", Family::eids)) == "((1,6),(1,5),(1,7))");
}

TEST_CASE("build_forecaster shapes") {
    const auto v = make("(1,14)", Family::vanilla, 2, 1);
    REQUIRE(v.subnets.size() == 1);
    CHECK(v.subnets[0].input_dim() == 1);
    CHECK(v.subnets[0].readout.weights.size() == 14);
    CHECK_FALSE(v.is_eids());

    const auto e = make("((1,6),(1,5),(1,7))", Family::eids, 2, 1);
    REQUIRE(e.subnets.size() == 3);
    const std::size_t dims[] = {1, 2, 3};
    const std::size_t cells[] = {6, 5, 7};
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(e.subnets[s].input_dim() == dims[s]);
        CHECK(e.subnets[s].layers.front().hidden_dim() == cells[s]);
        CHECK_FALSE(e.stage_trained[s]);
    }

    const auto s = make("(3,9,8,3)", Family::stacked, 2, 1);
    REQUIRE(s.subnets[0].layers.size() == 3);
    CHECK(s.subnets[0].layers[1].input_dim() == 9);
    CHECK(s.subnets[0].layers[2].input_dim() == 8);

    const auto b = make("(1,28)", Family::bidirectional, 2, 1);
    CHECK(b.subnets[0].layers.size() == 2);
    CHECK(b.subnets[0].readout.weights.size() == 56);
}

TEST_CASE("param_count hand values") {
    CHECK(param_count(parse_model_spec("(1,14)", Family::vanilla), 2) == 911);
    CHECK(param_count(parse_model_spec("(1,28)", Family::bidirectional), 2) == 6777);
    CHECK(param_count(parse_model_spec("(1,1)", Family::vanilla), 2) == 14);
    CHECK(param_count(parse_model_spec("(3,9,8,3)", Family::stacked), 2) ==
          count_by_hand({{1, 9}, {9, 8}, {8, 3}}, 3));
    CHECK(param_count(parse_model_spec("((1,6),(1,5),(1,7))", Family::eids), 2) ==
          count_by_hand({{1, 6}}, 6) + count_by_hand({{2, 5}}, 5) + count_by_hand({{3, 7}}, 7));
}

TEST_CASE("param_count equals allocated scalars for every table spec") {
    for (const auto& row : kTableRows) {
        for (std::size_t D : {1, 2, 4}) {
            const auto f = make(row.structure, row.family, D, 3);
            CHECK(param_count(f.spec, D) == allocated(f));
            CHECK(f.scalar_count() == allocated(f));
        }
    }
}

TEST_CASE("same seed gives bit-identical parameters") {
    const auto a = make("((1,6),(1,5),(1,8))", Family::eids, 2, 42);
    const auto b = make("((1,6),(1,5),(1,8))", Family::eids, 2, 42);
    const auto c = make("((1,6),(1,5),(1,8))", Family::eids, 2, 43);
    std::vector<double> fa, fb, fc;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto x = nn::flatten(a.subnets[s]), y = nn::flatten(b.subnets[s]), z = nn::flatten(c.subnets[s]);
        fa.insert(fa.end(), x.begin(), x.end());
        fb.insert(fb.end(), y.begin(), y.end());
        fc.insert(fc.end(), z.begin(), z.end());
    }
    CHECK(fa == fb);
    CHECK(fa != fc);
}

TEST_CASE("predict with zeroed readouts") {
    const double window[] = {0.3, -0.2};
    for (const auto& row : kTableRows) {
        if (row.family == Family::eids) continue;
        auto f = make(row.structure, row.family, 2, 5);
        for (double& w : f.subnets[0].readout.weights) w = 0.0;
        f.subnets[0].readout.bias = 0.7;
        CHECK(predict(f, window) == 0.7);
    }

    auto e = make("((1,6),(1,5),(1,8))", Family::eids, 2, 5);
    for (std::size_t s : {kExcitatory, kInhibitory}) {
        for (double& w : e.subnets[s].readout.weights) w = 0.0;
        e.subnets[s].readout.bias = 0.0;
    }
    CHECK(predict(e, window) == 0.0);

    const double short_window[] = {0.1};
    CHECK_THROWS_AS(predict(e, short_window), std::invalid_argument);
}

TEST_CASE("EiDS output is the excitatory minus inhibitory forward, bitwise") {
    nn::Prng rng(77);
    for (int i = 0; i < 50; ++i) {
        const auto f = make("((1,6),(1,5),(1,7))", Family::eids, 2, 100 + i);
        const double window[] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};

        // Three independent subnet forward calls.
        const double ya = nn::lstm_predict(nn::Sequence{1, {window[0], window[1]}}, f.subnets[kSensory]);
        const double yb =
            nn::lstm_predict(nn::Sequence{2, {window[0], ya, window[1], ya}}, f.subnets[kExcitatory]);
        const double yc =
            nn::lstm_predict(nn::Sequence{3, {window[0], ya, yb, window[1], ya, yb}}, f.subnets[kInhibitory]);

        const auto parts = eids_components(f, window);
        CHECK(parts.sensory == ya);
        CHECK(parts.excitatory == yb);
        CHECK(parts.inhibitory == yc);
        CHECK(predict(f, window) == yb - yc);
        CHECK(predict(f, window) == parts.composite());
    }
}

TEST_CASE("a stub inhibitory subnet emitting the excitatory residual gives zero error") {
    nn::Prng rng(9);
    for (int i = 0; i < 50; ++i) {
        auto f = make("((1,6),(1,5),(1,8))", Family::eids, 2, 200 + i);
        const double window[] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const double yb = eids_components(f, window).excitatory;
        // Within a factor of two of yb, so yb - target is exact.
        const double target = yb * rng.uniform(0.5, 2.0);

        for (double& w : f.subnets[kInhibitory].readout.weights) w = 0.0;
        f.subnets[kInhibitory].readout.bias = yb - target;
        CHECK(predict(f, window) - target == 0.0);
    }
}

TEST_CASE("predict_batch") {
    const auto f = make("((1,6),(1,5),(1,8))", Family::eids, 3, 11);
    SupervisedDataset empty;
    empty.spec = {3, 1};
    CHECK(predict_batch(f, empty).empty());

    nn::Prng rng(12);
    SupervisedDataset ds;
    ds.spec = {3, 1};
    for (int i = 0; i < 100; ++i)
        ds.pairs.push_back({{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}, rng.uniform(-2, 2)});

    SupervisedDataset single;
    single.spec = ds.spec;
    single.pairs = {ds.pairs[0]};
    const auto one = predict_batch(f, single);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == predict(f, ds.pairs[0].inputs));

    const auto all = predict_batch(f, ds);
    REQUIRE(all.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == predict(f, ds.pairs[i].inputs));

    ds.pairs[37].inputs.pop_back();
    CHECK_THROWS_WITH(predict_batch(f, ds), doctest::Contains("37"));
}
