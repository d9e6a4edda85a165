#include "mpirisk/gbdt.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpirisk {

namespace {

constexpr double kMinGain = 1e-12;

// Gains within this relative margin count as ties, so summation-order noise
// cannot flip the choice between splits that are equal in exact arithmetic.
constexpr double kTieRelative = 1e-10;

bool beats(double gain, double incumbent) {
    return gain > kMinGain && gain > incumbent + kTieRelative * std::abs(incumbent);
}

double leaf_weight(double g, double h, double l2) { return -g / (h + l2); }
double score_term(double g, double h, double l2) { return g * g / (h + l2); }

}  // namespace

// ---------------------------------------------------------------- tree

std::size_t Tree::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
    }
    return i;
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) continue;
        for (int c : {nodes[i].left, nodes[i].right}) {
            d[static_cast<std::size_t>(c)] = d[i] + 1;
            best = std::max(best, d[i] + 1);
        }
    }
    return best;
}

void TrainParams::check() const {
    if (n_rounds < 0 || max_depth < 1 || !(learning_rate > 0.0) || !(l2_leaf_reg >= 0.0) ||
        !(min_child_weight >= 0.0) || !(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
        throw Error(ErrorCode::precondition,
                    "train params: need n_rounds >= 0, max_depth >= 1, learning_rate > 0, "
                    "l2 >= 0, min_child_weight >= 0, feature_subsample in (0, 1]");
    }
}

void TreeEnsemble::check() const {
    if (n_classes < 2) throw Error(ErrorCode::precondition, "model: n_classes must be >= 2");
    if (base_score.size() != static_cast<std::size_t>(n_classes)) {
        throw Error(ErrorCode::precondition, "model: base_score size differs from n_classes");
    }
    for (const auto& round : rounds) {
        if (round.size() != static_cast<std::size_t>(n_classes)) {
            throw Error(ErrorCode::precondition, "model: every round needs one tree per class");
        }
        for (const auto& tree : round) {
            if (tree.nodes.empty()) throw Error(ErrorCode::precondition, "model: empty tree");
            const auto size = static_cast<int>(tree.nodes.size());
            for (int i = 0; i < size; ++i) {
                const auto& n = tree.nodes[static_cast<std::size_t>(i)];
                if (n.is_leaf()) continue;
                // Children follow their parent in the array.
                if (n.left <= i || n.right <= i || n.left >= size || n.right >= size ||
                    n.feature >= static_cast<int>(n_features())) {
                    throw Error(ErrorCode::precondition, "model: malformed node");
                }
            }
        }
    }
}

// ---------------------------------------------------------------- kernels

SplitCandidate best_split_for_feature(int feature, const SplitInput& input,
                                      const SplitContext& ctx) {
    SplitCandidate best;
    const auto& rows = input.rows;
    if (rows.size() < 2) return best;

    double g_total = 0.0;
    double h_total = 0.0;
    for (auto r : rows) {
        g_total += ctx.grad[r];
        h_total += ctx.hess[r];
    }
    const double parent = score_term(g_total, h_total, ctx.l2);

    double gl = 0.0;
    double hl = 0.0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        gl += ctx.grad[rows[i]];
        hl += ctx.hess[rows[i]];
        const double a = input.column[rows[i]];
        const double b = input.column[rows[i + 1]];
        if (!(a < b)) continue;
        const double hr = h_total - hl;
        if (hl < ctx.min_child_weight || hr < ctx.min_child_weight) continue;
        const double gr = g_total - gl;
        const double gain =
            0.5 * (score_term(gl, hl, ctx.l2) + score_term(gr, hr, ctx.l2) - parent);
        if (beats(gain, best.gain)) {
            double mid = 0.5 * (a + b);
            if (!(mid > a)) mid = b;
            best = {gain, feature, mid};
        }
    }
    return best;
}

SplitCandidate find_best_split_serial(std::span<const int> features,
                                      std::span<const SplitInput> inputs,
                                      const SplitContext& ctx) {
    SplitCandidate best;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto c = best_split_for_feature(features[i], inputs[i], ctx);
        if (c.valid() && beats(c.gain, best.gain)) best = c;
    }
    return best;
}

SplitCandidate find_best_split_parallel(std::span<const int> features,
                                        std::span<const SplitInput> inputs,
                                        const SplitContext& ctx) {
    std::vector<SplitCandidate> per_feature(features.size());
    const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        per_feature[k] = best_split_for_feature(features[k], inputs[k], ctx);
    }
    // Same reduction order as the serial scan.
    SplitCandidate best;
    for (const auto& c : per_feature) {
        if (c.valid() && beats(c.gain, best.gain)) best = c;
    }
    return best;
}

// ---------------------------------------------------------------- training

namespace {

struct Builder {
    const TrainParams& params;
    std::span<const std::vector<double>> columns;  // column-major X
    std::span<const double> grad;
    std::span<const double> hess;
    std::span<const double> weight;
    std::vector<int> features;  // active features for this tree, ascending
    Tree tree;
    std::vector<char> goes_left;

    // sorted[i] holds this node's rows ordered by features[i].
    int grow(std::vector<std::vector<std::uint32_t>> sorted, int depth) {
        const auto id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        const auto& rows = sorted.front();
        double g = 0.0;
        double h = 0.0;
        double w = 0.0;
        for (auto r : rows) {
            g += grad[r];
            h += hess[r];
            w += weight[r];
        }
        tree.nodes[static_cast<std::size_t>(id)].cover = w;

        SplitCandidate split;
        if (depth < params.max_depth) {
            std::vector<SplitInput> inputs;
            inputs.reserve(features.size());
            for (std::size_t i = 0; i < features.size(); ++i) {
                inputs.push_back({columns[static_cast<std::size_t>(features[i])], sorted[i]});
            }
            const SplitContext ctx{grad, hess, params.l2_leaf_reg, params.min_child_weight};
            split = params.execution == Execution::parallel
                        ? find_best_split_parallel(features, inputs, ctx)
                        : find_best_split_serial(features, inputs, ctx);
        }
        if (!split.valid()) {
            tree.nodes[static_cast<std::size_t>(id)].value =
                params.learning_rate * leaf_weight(g, h, params.l2_leaf_reg);
            return id;
        }

        const auto& col = columns[static_cast<std::size_t>(split.feature)];
        for (auto r : rows) goes_left[r] = col[r] < split.threshold ? 1 : 0;

        std::vector<std::vector<std::uint32_t>> left(sorted.size());
        std::vector<std::vector<std::uint32_t>> right(sorted.size());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            for (auto r : sorted[i]) (goes_left[r] ? left[i] : right[i]).push_back(r);
        }
        sorted.clear();
        sorted.shrink_to_fit();

        {
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = split.feature;
            node.threshold = split.threshold;
        }
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.left = l;
        node.right = r;
        return id;
    }
};

double weighted_log_loss(const std::vector<double>& margin, std::span<const int> y,
                         std::span<const double> weight, std::size_t k) {
    double loss = 0.0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double* m = margin.data() + i * k;
        const double mx = *std::max_element(m, m + k);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(m[c] - mx);
        const double log_p = m[static_cast<std::size_t>(y[i])] - mx - std::log(z);
        loss -= weight[i] * log_p;
        wsum += weight[i];
    }
    return loss / wsum;
}

}  // namespace

TreeEnsemble train(const FeatureMatrix& X, std::span<const int> y, const TrainParams& params,
                   std::span<const double> sample_weight, TrainTrace* trace) {
    params.check();
    const std::size_t n = X.rows();
    const std::size_t f = X.cols();
    if (n == 0 || f == 0) throw Error(ErrorCode::precondition, "train: empty feature matrix");
    if (y.size() != n) throw Error(ErrorCode::precondition, "train: labels differ in length from X");
    if (n < 2) throw Error(ErrorCode::precondition, "train: need at least 2 rows");
    if (!sample_weight.empty() && sample_weight.size() != n) {
        throw Error(ErrorCode::precondition, "train: sample weights differ in length from X");
    }
    for (double v : X.values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::precondition, "train: non-finite feature value");
    }

    const int max_label = *std::max_element(y.begin(), y.end());
    if (*std::min_element(y.begin(), y.end()) < 0) {
        throw Error(ErrorCode::precondition, "train: labels must be non-negative");
    }
    const int k_int = params.n_classes > 0 ? params.n_classes : max_label + 1;
    if (max_label >= k_int) throw Error(ErrorCode::precondition, "train: label exceeds n_classes");
    if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) {
        throw Error(ErrorCode::precondition, "train: labels contain a single class");
    }
    const auto k = static_cast<std::size_t>(std::max(2, k_int));

    std::vector<double> weight(n, 1.0);
    if (!sample_weight.empty()) weight.assign(sample_weight.begin(), sample_weight.end());

    TreeEnsemble model;
    model.n_classes = static_cast<int>(k);
    model.feature_names = X.feature_names;
    model.learning_rate = params.learning_rate;
    model.params = params;

    // Prior log-probabilities; classes absent from y get a floor.
    std::vector<double> class_w(k, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        class_w[static_cast<std::size_t>(y[i])] += weight[i];
        wsum += weight[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
        model.base_score.push_back(std::log(std::max(class_w[c] / wsum, 1e-6)));
    }

    std::vector<std::vector<double>> columns(f, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < f; ++j) columns[j][i] = X.at(i, j);
    }
    std::vector<std::vector<std::uint32_t>> presorted(f);
    for (std::size_t j = 0; j < f; ++j) {
        auto& idx = presorted[j];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0U);
        std::stable_sort(idx.begin(), idx.end(), [&col = columns[j]](auto a, auto b) {
            return col[a] < col[b];
        });
    }

    std::vector<double> margin(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) margin[i * k + c] = model.base_score[c];
    }
    if (trace) {
        trace->log_loss.clear();
        trace->log_loss.push_back(weighted_log_loss(margin, y, weight, k));
    }

    std::vector<double> grad(n);
    std::vector<double> hess(n);
    std::vector<double> prob(n * k);
    std::vector<char> goes_left(n, 0);
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = softmax(std::span<const double>(margin).subspan(i * k, k));
            std::copy(p.begin(), p.end(), prob.begin() + static_cast<std::ptrdiff_t>(i * k));
        }

        std::vector<Tree> trees;
        trees.reserve(k);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = prob[i * k + c];
                const double target = static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0;
                grad[i] = weight[i] * (p - target);
                hess[i] = weight[i] * p * (1.0 - p);
            }

            Builder b{params, columns, grad, hess, weight, {}, {}, std::move(goes_left)};
            std::vector<std::vector<std::uint32_t>> root;
            if (params.feature_subsample >= 1.0) {
                b.features.resize(f);
                std::iota(b.features.begin(), b.features.end(), 0);
            } else {
                // Partial Fisher-Yates on a per-tree stream.
                const auto take = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::lround(params.feature_subsample * f)));
                std::vector<int> all(f);
                std::iota(all.begin(), all.end(), 0);
                SequentialRng rng(params.seed, static_cast<std::uint64_t>(round) * k + c);
                for (std::size_t i = 0; i < take; ++i) {
                    std::swap(all[i], all[i + rng.below(f - i)]);
                }
                b.features.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
                std::sort(b.features.begin(), b.features.end());
            }
            for (int feat : b.features) root.push_back(presorted[static_cast<std::size_t>(feat)]);
            b.grow(std::move(root), 0);
            goes_left = std::move(b.goes_left);
            trees.push_back(std::move(b.tree));
        }

        for (std::size_t i = 0; i < n; ++i) {
            const auto x = X.row(i);
            for (std::size_t c = 0; c < k; ++c) margin[i * k + c] += trees[c].predict(x);
        }
        model.rounds.push_back(std::move(trees));
        if (trace) trace->log_loss.push_back(weighted_log_loss(margin, y, weight, k));
    }
    return model;
}

// ---------------------------------------------------------------- prediction

std::vector<double> predict_margin(const TreeEnsemble& model, std::span<const double> x,
                                   std::optional<std::size_t> rounds) {
    if (x.size() != model.n_features()) {
        throw Error(ErrorCode::dimension, "predict: expected " + std::to_string(model.n_features()) +
                                              " features, got " + std::to_string(x.size()));
    }
    std::vector<double> m = model.base_score;
    const std::size_t limit = std::min(rounds.value_or(model.rounds.size()), model.rounds.size());
    for (std::size_t r = 0; r < limit; ++r) {
        for (std::size_t c = 0; c < m.size(); ++c) m[c] += model.rounds[r][c].predict(x);
    }
    return m;
}

std::vector<double> softmax(std::span<const double> margins) {
    std::vector<double> p(margins.size());
    if (margins.empty()) return p;
    const double mx = *std::max_element(margins.begin(), margins.end());
    double z = 0.0;
    for (std::size_t c = 0; c < margins.size(); ++c) {
        p[c] = std::exp(margins[c] - mx);
        z += p[c];
    }
    for (double& v : p) v /= z;
    return p;
}

std::vector<double> predict_proba(const TreeEnsemble& model, std::span<const double> x) {
    return softmax(predict_margin(model, x));
}

int predict_class(const TreeEnsemble& model, std::span<const double> x) {
    const auto m = predict_margin(model, x);
    return static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
}

// ---------------------------------------------------------------- serialization

namespace {

constexpr const char* kModelFormat = "mpirisk.gbdt";
constexpr int kModelVersion = 1;

}  // namespace

std::string model_to_json(const TreeEnsemble& model) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["n_classes"] = model.n_classes;
    j["feature_names"] = model.feature_names;
    j["base_score"] = model.base_score;
    j["learning_rate"] = model.learning_rate;
    const auto& p = model.params;
    j["params"] = {{"n_rounds", p.n_rounds},
                   {"max_depth", p.max_depth},
                   {"learning_rate", p.learning_rate},
                   {"l2_leaf_reg", p.l2_leaf_reg},
                   {"min_child_weight", p.min_child_weight},
                   {"feature_subsample", p.feature_subsample},
                   {"seed", p.seed},
                   {"n_classes", p.n_classes}};
    ordered_json rounds = ordered_json::array();
    for (const auto& round : model.rounds) {
        ordered_json trees = ordered_json::array();
        for (const auto& t : round) {
            ordered_json feature = ordered_json::array(), threshold = ordered_json::array(),
                         left = ordered_json::array(), right = ordered_json::array(),
                         value = ordered_json::array(), cover = ordered_json::array();
            for (const auto& n : t.nodes) {
                feature.push_back(n.feature);
                threshold.push_back(n.threshold);
                left.push_back(n.left);
                right.push_back(n.right);
                value.push_back(n.value);
                cover.push_back(n.cover);
            }
            trees.push_back({{"feature", feature},
                             {"threshold", threshold},
                             {"left", left},
                             {"right", right},
                             {"value", value},
                             {"cover", cover}});
        }
        rounds.push_back(trees);
    }
    j["rounds"] = rounds;
    return j.dump() + "\n";
}

TreeEnsemble model_from_json(std::string_view text) {
    using nlohmann::json;
    try {
        const auto j = json::parse(text);
        if (j.at("format") != kModelFormat) throw Error(ErrorCode::schema, "not a gbdt model file");
        if (j.at("version").get<int>() != kModelVersion) {
            throw Error(ErrorCode::schema, "unsupported gbdt model version");
        }
        TreeEnsemble m;
        m.n_classes = j.at("n_classes").get<int>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.base_score = j.at("base_score").get<std::vector<double>>();
        m.learning_rate = j.at("learning_rate").get<double>();
        const auto& p = j.at("params");
        m.params.n_rounds = p.at("n_rounds").get<int>();
        m.params.max_depth = p.at("max_depth").get<int>();
        m.params.learning_rate = p.at("learning_rate").get<double>();
        m.params.l2_leaf_reg = p.at("l2_leaf_reg").get<double>();
        m.params.min_child_weight = p.at("min_child_weight").get<double>();
        m.params.feature_subsample = p.at("feature_subsample").get<double>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        m.params.n_classes = p.at("n_classes").get<int>();
        for (const auto& round : j.at("rounds")) {
            std::vector<Tree> trees;
            for (const auto& t : round) {
                const auto feature = t.at("feature").get<std::vector<int>>();
                const auto threshold = t.at("threshold").get<std::vector<double>>();
                const auto left = t.at("left").get<std::vector<int>>();
                const auto right = t.at("right").get<std::vector<int>>();
                const auto value = t.at("value").get<std::vector<double>>();
                const auto cover = t.at("cover").get<std::vector<double>>();
                const auto size = feature.size();
                if (threshold.size() != size || left.size() != size || right.size() != size ||
                    value.size() != size || cover.size() != size) {
                    throw Error(ErrorCode::schema, "tree node arrays differ in length");
                }
                Tree tree;
                for (std::size_t i = 0; i < size; ++i) {
                    tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i], cover[i]});
                }
                trees.push_back(std::move(tree));
            }
            m.rounds.push_back(std::move(trees));
        }
        m.check();
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, std::string("gbdt model JSON: ") + e.what());
    }
}

}  // namespace mpirisk
