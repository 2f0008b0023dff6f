#include "eids/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <string_view>

namespace eids {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

TimeSeries::TimeSeries(std::vector<double> values, double sample_period, std::string label)
    : values_(std::move(values)), sample_period_(sample_period), label_(std::move(label)) {
    if (values_.empty()) throw SeriesError("time series must contain at least one sample");
    if (!(sample_period_ > 0.0) || !std::isfinite(sample_period_))
        throw SeriesError("sample period must be positive");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw SeriesError("non-finite sample at index " + std::to_string(i));
    }
}

void EmbeddingSpec::validate() const {
    if (embed_dim < 1) throw SeriesError("embedding dimension must be >= 1");
    if (horizon < 1) throw SeriesError("horizon must be >= 1");
}

TimeSeries load_csv(std::istream& source, double sample_period, std::string label) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(source, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        double v = 0.0;
        if (!parse_double(text, v)) {
            // Only the first non-blank line may be a header.
            if (!seen_content) {
                seen_content = true;
                continue;
            }
            throw SeriesError("non-numeric value at line " + std::to_string(line_no));
        }
        if (!std::isfinite(v)) throw SeriesError("non-finite value at line " + std::to_string(line_no));
        seen_content = true;
        values.push_back(v);
    }
    if (values.empty()) throw SeriesError("csv stream contains no samples");
    return TimeSeries(std::move(values), sample_period, std::move(label));
}

TimeSeries load_csv_file(const std::string& path, double sample_period) {
    std::ifstream in(path);
    if (!in) throw SeriesError("cannot open " + path);
    return load_csv(in, sample_period, path);
}

TimeSeries generate_mackey_glass(std::size_t n, double history, const MackeyGlassParams& p) {
    if (n < 1) throw SeriesError("mackey-glass: n must be >= 1");
    if (!(p.dt > 0.0)) throw SeriesError("mackey-glass: dt must be positive");
    if (!(p.tau >= 0.0)) throw SeriesError("mackey-glass: tau must be non-negative");

    std::vector<double> xs;
    xs.reserve(n);
    xs.push_back(history);

    // Linear interpolation into the sample history; x(t) = history for t <= 0.
    // Queries past the newest sample (only when tau < dt) clamp to it.
    const auto delayed = [&](double t) {
        if (t <= 0.0) return history;
        const double pos = t / p.dt;
        const auto lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= xs.size()) return xs.back();
        return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
    };
    const auto rhs = [&](double x, double xd) {
        return p.beta * xd / (1.0 + std::pow(xd, p.exponent)) - p.gamma * x;
    };

    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t = static_cast<double>(k) * p.dt;
        const double x = xs.back();
        double k1, k2, k3, k4;
        if (p.tau == 0.0) {
            k1 = rhs(x, x);
            const double x2 = x + 0.5 * p.dt * k1;
            k2 = rhs(x2, x2);
            const double x3 = x + 0.5 * p.dt * k2;
            k3 = rhs(x3, x3);
            const double x4 = x + p.dt * k3;
            k4 = rhs(x4, x4);
        } else {
            const double d0 = delayed(t - p.tau);
            const double dh = delayed(t + 0.5 * p.dt - p.tau);
            const double d1 = delayed(t + p.dt - p.tau);
            k1 = rhs(x, d0);
            k2 = rhs(x + 0.5 * p.dt * k1, dh);
            k3 = rhs(x + 0.5 * p.dt * k2, dh);
            k4 = rhs(x + p.dt * k3, d1);
        }
        const double next = x + p.dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        if (!std::isfinite(next))
            throw SeriesError("mackey-glass: non-finite value at index " + std::to_string(k + 1));
        xs.push_back(next);
    }
    return TimeSeries(std::move(xs), p.dt, "mackey-glass");
}

TimeSeries generate_lorenz(std::size_t n, Vec3 initial, const LorenzParams& p, Axis component) {
    if (n < 1) throw SeriesError("lorenz: n must be >= 1");
    if (!(p.dt > 0.0)) throw SeriesError("lorenz: dt must be positive");

    const auto flow = [&](const Vec3& s) {
        return Vec3{p.sigma * (s.y - s.x), s.x * (p.rho - s.z) - s.y, s.x * s.y - p.beta * s.z};
    };
    const auto axpy = [](const Vec3& s, double a, const Vec3& d) {
        return Vec3{s.x + a * d.x, s.y + a * d.y, s.z + a * d.z};
    };
    const auto pick = [component](const Vec3& s) {
        switch (component) {
            case Axis::x: return s.x;
            case Axis::y: return s.y;
            case Axis::z: return s.z;
        }
        return s.x;
    };

    std::vector<double> out;
    out.reserve(n);
    Vec3 s = initial;
    out.push_back(pick(s));
    for (std::size_t k = 1; k < n; ++k) {
        const Vec3 k1 = flow(s);
        const Vec3 k2 = flow(axpy(s, 0.5 * p.dt, k1));
        const Vec3 k3 = flow(axpy(s, 0.5 * p.dt, k2));
        const Vec3 k4 = flow(axpy(s, p.dt, k3));
        const double h = p.dt / 6.0;
        s = Vec3{s.x + h * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                 s.y + h * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
                 s.z + h * (k1.z + 2 * k2.z + 2 * k3.z + k4.z)};
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z))
            throw SeriesError("lorenz: non-finite value at index " + std::to_string(k));
        out.push_back(pick(s));
    }
    return TimeSeries(std::move(out), p.dt, "lorenz");
}

SupervisedDataset embed(const TimeSeries& series, const EmbeddingSpec& spec) {
    spec.validate();
    const std::size_t lag_span = spec.span();
    if (series.size() <= lag_span) {
        throw SeriesError("series of length " + std::to_string(series.size()) +
                          " too short for embedding (D=" + std::to_string(spec.embed_dim) +
                          ", horizon=" + std::to_string(spec.horizon) + ")");
    }
    SupervisedDataset out;
    out.spec = spec;
    out.origin_offset = lag_span;
    out.pairs.reserve(series.size() - lag_span);
    for (std::size_t t = lag_span; t < series.size(); ++t) {
        StateVectorPair pair;
        pair.inputs.reserve(spec.embed_dim);
        for (std::size_t k = 0; k < spec.embed_dim; ++k) {
            pair.inputs.push_back(series[t - lag_span + k * spec.horizon]);
        }
        pair.target = series[t];
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

std::pair<SupervisedDataset, SupervisedDataset> split_train_test(const SupervisedDataset& dataset,
                                                                 std::size_t n_train,
                                                                 std::size_t n_test) {
    if (n_train + n_test > dataset.size()) {
        throw SeriesError("split needs " + std::to_string(n_train + n_test) + " pairs, dataset has " +
                          std::to_string(dataset.size()));
    }
    SupervisedDataset train, test;
    train.spec = test.spec = dataset.spec;
    train.origin_offset = dataset.origin_offset;
    test.origin_offset = dataset.origin_offset + n_train;
    const auto first = dataset.pairs.begin();
    train.pairs.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
    test.pairs.assign(first + static_cast<std::ptrdiff_t>(n_train),
                      first + static_cast<std::ptrdiff_t>(n_train + n_test));
    return {std::move(train), std::move(test)};
}

NormalizationStats fit_normalizer(const SupervisedDataset& train) {
    if (train.empty()) throw SeriesError("cannot fit normalizer on an empty training set");
    double sum = 0.0;
    std::size_t count = 0;
    const auto visit = [&train](const std::function<void(double)>& f) {
        for (const auto& pair : train.pairs) {
            for (double x : pair.inputs) f(x);
            f(pair.target);
        }
    };
    visit([&](double x) {
        sum += x;
        ++count;
    });
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    visit([&](double x) { sq += (x - mean) * (x - mean); });
    const double std_dev = std::sqrt(sq / static_cast<double>(count));
    if (!(std_dev > 0.0)) throw SeriesError("training data is constant; cannot standardize");
    return {mean, std_dev};
}

std::vector<double> apply_normalization(const NormalizationStats& stats, std::span<const double> xs) {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [&](double x) { return stats.apply(x); });
    return out;
}

std::vector<double> invert_normalization(const NormalizationStats& stats, std::span<const double> zs) {
    std::vector<double> out(zs.size());
    std::transform(zs.begin(), zs.end(), out.begin(), [&](double z) { return stats.invert(z); });
    return out;
}

SupervisedDataset normalize(const SupervisedDataset& dataset, const NormalizationStats& stats) {
    SupervisedDataset out = dataset;
    for (auto& pair : out.pairs) {
        for (double& x : pair.inputs) x = stats.apply(x);
        pair.target = stats.apply(pair.target);
    }
    return out;
}

}  // namespace eids
