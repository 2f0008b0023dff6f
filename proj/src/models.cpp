#include "eids/models.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>

namespace eids {

namespace {

struct Node {
    bool is_number = false;
    std::size_t number = 0;
    std::vector<Node> children;
};

// Recursive-descent parser over the whitespace-stripped notation.
class NotationParser {
public:
    explicit NotationParser(std::string_view text) : text_(text) {}

    Node parse() {
        Node n = group();
        if (pos_ != text_.size()) fail("trailing characters");
        return n;
    }

private:
    Node group() {
        expect('(');
        Node n;
        n.children.push_back(item());
        while (pos_ < text_.size() && (text_[pos_] == ',' || text_[pos_] == '-')) {
            ++pos_;
            n.children.push_back(item());
        }
        expect(')');
        return n;
    }

    Node item() {
        if (pos_ < text_.size() && text_[pos_] == '(') return group();
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
        if (ec != std::errc()) fail("expected a number");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        Node n;
        n.is_number = true;
        n.number = value;
        return n;
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ModelSpecError("malformed model structure \"" + std::string(text_) + "\": " + what + " at offset " +
                             std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::vector<std::size_t> numbers_of(const Node& n, std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& c : n.children) {
        if (!c.is_number) throw ModelSpecError("unexpected nested group in \"" + std::string(text) + "\"");
        out.push_back(c.number);
    }
    return out;
}

SubnetShape layer_cell_pair(const Node& n, std::string_view text) {
    const auto nums = numbers_of(n, text);
    if (nums.size() != 2) throw ModelSpecError("EiDS subnet must be (layers,cells) in \"" + std::string(text) + "\"");
    return {nums[0], nums[1]};
}

std::string strip(std::string_view text) {
    std::string out;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

void require_cells(std::size_t n, const char* what) {
    if (n < 1) throw ModelSpecError(std::string(what) + ": cell counts must be >= 1");
}

nn::NetworkParams build_stack(const std::vector<std::size_t>& cells, std::size_t input_dim, nn::Prng& rng) {
    nn::NetworkParams net;
    std::size_t in = input_dim;
    for (std::size_t h : cells) {
        net.layers.push_back(nn::init_lstm_params(in, h, rng));
        in = h;
    }
    net.readout = nn::init_readout(in, rng);
    return net;
}

std::size_t stack_count(const std::vector<std::size_t>& cells, std::size_t input_dim) {
    std::size_t n = 0, in = input_dim;
    for (std::size_t h : cells) {
        n += 4 * h * (in + h + 1);
        in = h;
    }
    return n + in + 1;
}

std::vector<std::size_t> shape_cells(const SubnetShape& s) { return std::vector<std::size_t>(s.layers, s.cells); }

}  // namespace

std::string_view family_key(Family f) {
    switch (f) {
        case Family::vanilla: return "vanilla";
        case Family::stacked: return "stacked";
        case Family::bidirectional: return "bidirectional";
        case Family::eids: return "eids";
    }
    return "unknown";
}

std::string_view family_display_name(Family f) {
    switch (f) {
        case Family::vanilla: return "Vanilla LSTM";
        case Family::stacked: return "Stacked LSTM";
        case Family::bidirectional: return "Bidirectional LSTM";
        case Family::eids: return "EiDS";
    }
    return "unknown";
}

Family parse_family(std::string_view key) {
    for (Family f : {Family::vanilla, Family::stacked, Family::bidirectional, Family::eids})
        if (family_key(f) == key) return f;
    throw ModelSpecError("unknown model family \"" + std::string(key) + "\"");
}

Family ModelSpec::family() const {
    switch (variant.index()) {
        case 0: return Family::vanilla;
        case 1: return Family::stacked;
        case 2: return Family::bidirectional;
        default: return Family::eids;
    }
}

void ModelSpec::validate() const {
    if (const auto* v = std::get_if<VanillaSpec>(&variant)) require_cells(v->cells, "vanilla");
    if (const auto* s = std::get_if<StackedSpec>(&variant)) {
        if (s->cells_per_layer.empty()) throw ModelSpecError("stacked: needs at least one layer");
        for (auto c : s->cells_per_layer) require_cells(c, "stacked");
    }
    if (const auto* b = std::get_if<BidirectionalSpec>(&variant)) require_cells(b->cells, "bidirectional");
    if (const auto* e = std::get_if<EidsSpec>(&variant)) {
        for (const auto& s : {e->sensory, e->excitatory, e->inhibitory}) {
            if (s.layers < 1) throw ModelSpecError("eids: subnet layer counts must be >= 1");
            require_cells(s.cells, "eids");
        }
    }
}

ModelSpec parse_model_spec(std::string_view raw, Family family) {
    std::string text = strip(raw);
    // A trailing "_<digits>" suffix is ignored.
    if (const auto us = text.rfind('_'); us != std::string::npos && us + 1 < text.size() &&
                                          std::all_of(text.begin() + static_cast<std::ptrdiff_t>(us + 1), text.end(),
                                                      [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        text.erase(us);
    }
    const Node root = NotationParser(text).parse();
    ModelSpec spec;
    switch (family) {
        case Family::vanilla:
        case Family::bidirectional: {
            const auto nums = numbers_of(root, raw);
            if (nums.size() != 2 || nums[0] != 1)
                throw ModelSpecError(std::string(family_key(family)) + " structure must be (1,cells), got \"" +
                                     std::string(raw) + "\"");
            if (family == Family::vanilla)
                spec.variant = VanillaSpec{nums[1]};
            else
                spec.variant = BidirectionalSpec{nums[1]};
            break;
        }
        case Family::stacked: {
            const auto nums = numbers_of(root, raw);
            if (nums.size() < 2) throw ModelSpecError("stacked structure needs (layers,cells...)");
            std::vector<std::size_t> cells(nums.begin() + 1, nums.end());
            if (cells.size() != nums[0]) {
                throw ModelSpecError("stacked structure \"" + std::string(raw) + "\" declares " +
                                     std::to_string(nums[0]) + " layers but lists " + std::to_string(cells.size()) +
                                     " cell counts");
            }
            spec.variant = StackedSpec{std::move(cells)};
            break;
        }
        case Family::eids: {
            if (root.children.size() != 3 || root.children[0].is_number)
                throw ModelSpecError("EiDS structure must be ((l,c),(l,c),(l,c)), got \"" + std::string(raw) + "\"");
            spec.variant = EidsSpec{layer_cell_pair(root.children[0], raw), layer_cell_pair(root.children[1], raw),
                                    layer_cell_pair(root.children[2], raw)};
            break;
        }
    }
    spec.validate();
    return spec;
}

std::string format_model_spec(const ModelSpec& spec) {
    const auto pair = [](const SubnetShape& s) {
        return "(" + std::to_string(s.layers) + "," + std::to_string(s.cells) + ")";
    };
    return std::visit(
        [&](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, VanillaSpec> || std::is_same_v<T, BidirectionalSpec>) {
                return "(1," + std::to_string(v.cells) + ")";
            } else if constexpr (std::is_same_v<T, StackedSpec>) {
                std::string out = "(" + std::to_string(v.cells_per_layer.size());
                for (auto c : v.cells_per_layer) out += "," + std::to_string(c);
                return out + ")";
            } else {
                return "(" + pair(v.sensory) + "," + pair(v.excitatory) + "," + pair(v.inhibitory) + ")";
            }
        },
        spec.variant);
}

std::size_t Forecaster::scalar_count() const {
    std::size_t n = 0;
    for (const auto& s : subnets) n += s.scalar_count();
    return n;
}

Forecaster build_forecaster(const ModelSpec& spec, std::size_t window_dim, nn::Prng& rng) {
    if (window_dim < 1) throw ModelSpecError("window dimension must be >= 1");
    spec.validate();
    Forecaster f;
    f.spec = spec;
    f.window_dim = window_dim;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, VanillaSpec>) {
                f.subnets.push_back(build_stack({v.cells}, 1, rng));
            } else if constexpr (std::is_same_v<T, StackedSpec>) {
                f.subnets.push_back(build_stack(v.cells_per_layer, 1, rng));
            } else if constexpr (std::is_same_v<T, BidirectionalSpec>) {
                nn::NetworkParams net;
                net.direction = nn::Direction::bidirectional;
                net.layers.push_back(nn::init_lstm_params(1, v.cells, rng));
                net.layers.push_back(nn::init_lstm_params(1, v.cells, rng));
                net.readout = nn::init_readout(2 * v.cells, rng);
                f.subnets.push_back(std::move(net));
            } else {
                f.subnets.push_back(build_stack(shape_cells(v.sensory), 1, rng));
                f.subnets.push_back(build_stack(shape_cells(v.excitatory), 2, rng));
                f.subnets.push_back(build_stack(shape_cells(v.inhibitory), 3, rng));
            }
        },
        spec.variant);
    f.stage_trained.assign(f.subnets.size(), false);
    return f;
}

std::size_t param_count(const ModelSpec& spec, std::size_t window_dim) {
    if (window_dim < 1) throw ModelSpecError("window dimension must be >= 1");
    spec.validate();
    return std::visit(
        [](const auto& v) -> std::size_t {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, VanillaSpec>) {
                return stack_count({v.cells}, 1);
            } else if constexpr (std::is_same_v<T, StackedSpec>) {
                return stack_count(v.cells_per_layer, 1);
            } else if constexpr (std::is_same_v<T, BidirectionalSpec>) {
                return 2 * (4 * v.cells * (1 + v.cells + 1)) + 2 * v.cells + 1;
            } else {
                return stack_count(shape_cells(v.sensory), 1) + stack_count(shape_cells(v.excitatory), 2) +
                       stack_count(shape_cells(v.inhibitory), 3);
            }
        },
        spec.variant);
}

nn::Sequence window_sequence(std::span<const double> window, std::span<const double> broadcast) {
    nn::Sequence seq;
    seq.dim = 1 + broadcast.size();
    seq.values.reserve(window.size() * seq.dim);
    for (double x : window) {
        seq.values.push_back(x);
        seq.values.insert(seq.values.end(), broadcast.begin(), broadcast.end());
    }
    return seq;
}

namespace {

void check_window(const Forecaster& f, std::span<const double> window) {
    if (window.size() != f.window_dim) {
        throw std::invalid_argument("window has " + std::to_string(window.size()) + " values, model expects " +
                                    std::to_string(f.window_dim));
    }
}

}  // namespace

EidsOutputs eids_components(const Forecaster& f, std::span<const double> window) {
    if (!f.is_eids()) throw std::invalid_argument("eids_components: forecaster is not EiDS");
    check_window(f, window);
    EidsOutputs out;
    out.sensory = nn::lstm_predict(window_sequence(window), f.subnets[kSensory]);
    const double a[] = {out.sensory};
    out.excitatory = nn::lstm_predict(window_sequence(window, a), f.subnets[kExcitatory]);
    const double ab[] = {out.sensory, out.excitatory};
    out.inhibitory = nn::lstm_predict(window_sequence(window, ab), f.subnets[kInhibitory]);
    return out;
}

double predict(const Forecaster& f, std::span<const double> window) {
    check_window(f, window);
    if (f.is_eids()) return eids_components(f, window).composite();
    return nn::lstm_predict(window_sequence(window), f.subnets.front());
}

std::vector<double> predict_batch(const Forecaster& f, const SupervisedDataset& dataset) {
    std::vector<double> out;
    out.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        try {
            out.push_back(predict(f, dataset.pairs[i].inputs));
        } catch (const std::exception& e) {
            throw std::invalid_argument("pair " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace eids
