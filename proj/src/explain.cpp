#include "mpirisk/explain.hpp"

#include "mpirisk/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpirisk {

namespace {

double child_share(const Tree& t, const TreeNode& n, int child) {
    const double total = t.nodes[static_cast<std::size_t>(n.left)].cover +
                         t.nodes[static_cast<std::size_t>(n.right)].cover;
    return t.nodes[static_cast<std::size_t>(child)].cover / total;
}

void require_covers(const TreeEnsemble& model) {
    for (const auto& round : model.rounds) {
        for (const auto& t : round) {
            for (const auto& n : t.nodes) {
                if (n.is_leaf()) continue;
                const double c = t.nodes[static_cast<std::size_t>(n.left)].cover +
                                 t.nodes[static_cast<std::size_t>(n.right)].cover;
                if (!(c > 0.0)) {
                    throw Error(ErrorCode::precondition, "tree_shap: model lacks node cover counts");
                }
            }
        }
    }
}

// ---- path-dependent TreeSHAP

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction,
                 int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / d1;
        path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) / d1;
    }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    double next = path[depth].pweight;
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next * d1 / (static_cast<double>(i + 1) * one);
            next = tmp - path[i].pweight * zero * static_cast<double>(depth - i) / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero * static_cast<double>(depth - i));
        }
    }
    for (std::size_t i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    double next = path[depth].pweight;
    double total = 0.0;
    const auto d1 = static_cast<double>(depth + 1);
    for (std::size_t i = depth; i-- > 0;) {
        if (one != 0.0) {
            const double tmp = next * d1 / (static_cast<double>(i + 1) * one);
            total += tmp;
            next = path[i].pweight - tmp * zero * (static_cast<double>(depth - i) / d1);
        } else if (zero != 0.0) {
            total += (path[i].pweight / zero) / (static_cast<double>(depth - i) / d1);
        }
    }
    return total;
}

struct ShapWalker {
    const Tree& tree;
    std::span<const double> x;
    double* phi;          // per feature, one class
    std::size_t stride;   // distance between features in phi

    void recurse(std::size_t node_index, std::size_t depth, PathElement* parent_path,
                 double zero_fraction, double one_fraction, int feature) {
        PathElement* path = parent_path + depth + 1;
        std::copy(parent_path, parent_path + depth + 1, path);
        extend_path(path, depth, zero_fraction, one_fraction, feature);

        const auto& node = tree.nodes[node_index];
        if (node.is_leaf()) {
            for (std::size_t i = 1; i <= depth; ++i) {
                const double w = unwound_path_sum(path, depth, i);
                const auto& el = path[i];
                phi[static_cast<std::size_t>(el.feature) * stride] +=
                    w * (el.one_fraction - el.zero_fraction) * node.value;
            }
            return;
        }

        const bool left = x[static_cast<std::size_t>(node.feature)] < node.threshold;
        const int hot = left ? node.left : node.right;
        const int cold = left ? node.right : node.left;
        const double hot_zero = child_share(tree, node, hot);
        const double cold_zero = child_share(tree, node, cold);

        double incoming_zero = 1.0;
        double incoming_one = 1.0;
        std::size_t index = 0;
        for (; index <= depth; ++index) {
            if (path[index].feature == node.feature) break;
        }
        if (index != depth + 1) {
            incoming_zero = path[index].zero_fraction;
            incoming_one = path[index].one_fraction;
            unwind_path(path, depth, index);
            depth -= 1;
        }

        recurse(static_cast<std::size_t>(hot), depth + 1, path, hot_zero * incoming_zero,
                incoming_one, node.feature);
        // A zero-cover cold branch carries no weight.
        if (cold_zero > 0.0) {
            recurse(static_cast<std::size_t>(cold), depth + 1, path, cold_zero * incoming_zero, 0.0,
                    node.feature);
        }
    }
};

ShapAttribution empty_attribution(const TreeEnsemble& model) {
    ShapAttribution a;
    a.n_features = model.n_features();
    a.n_classes = static_cast<std::size_t>(model.n_classes);
    a.base_value = model.base_score;
    a.phi.assign(a.n_features * a.n_classes, 0.0);
    return a;
}

}  // namespace

double expected_value(const Tree& tree) {
    return conditional_expectation(tree, {}, 0);
}

double conditional_expectation(const Tree& tree, std::span<const double> x, std::uint64_t known) {
    // Children always follow their parent in the node array, so a reverse
    // sweep sees both children before the parent.
    std::vector<double> v(tree.nodes.size());
    for (std::size_t i = tree.nodes.size(); i-- > 0;) {
        const auto& n = tree.nodes[i];
        if (n.is_leaf()) {
            v[i] = n.value;
            continue;
        }
        const auto l = static_cast<std::size_t>(n.left);
        const auto r = static_cast<std::size_t>(n.right);
        if (n.feature < 64 && (known >> n.feature & 1U)) {
            v[i] = x[static_cast<std::size_t>(n.feature)] < n.threshold ? v[l] : v[r];
        } else {
            v[i] = child_share(tree, n, n.left) * v[l] + child_share(tree, n, n.right) * v[r];
        }
    }
    return v[0];
}

ShapAttribution tree_shap(const TreeEnsemble& model, std::span<const double> x) {
    require_covers(model);
    auto a = empty_attribution(model);
    a.margin = predict_margin(model, x);
    std::vector<PathElement> storage;
    for (const auto& round : model.rounds) {
        for (std::size_t c = 0; c < round.size(); ++c) {
            const auto& tree = round[c];
            a.base_value[c] += expected_value(tree);
            const auto d = static_cast<std::size_t>(tree.depth());
            storage.assign((d + 2) * (d + 3) / 2, PathElement{});
            ShapWalker walker{tree, x, a.phi.data() + c, a.n_classes};
            walker.recurse(0, 0, storage.data(), 1.0, 1.0, -1);
        }
    }
    return a;
}

ShapAttribution brute_force_shap(const TreeEnsemble& model, std::span<const double> x) {
    const std::size_t f = model.n_features();
    if (f > kBruteForceMaxFeatures) {
        throw Error(ErrorCode::precondition, "brute_force_shap: " + std::to_string(f) +
                                                 " features exceeds the enumeration limit of 15");
    }
    require_covers(model);
    auto a = empty_attribution(model);
    a.margin = predict_margin(model, x);
    const std::size_t k = a.n_classes;
    const std::uint64_t subsets = 1ULL << f;

    // value[mask * k + c] = E[margin_c | features in mask follow x]
    std::vector<double> value(subsets * k);
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        for (std::size_t c = 0; c < k; ++c) {
            double v = model.base_score[c];
            for (const auto& round : model.rounds) v += conditional_expectation(round[c], x, mask);
            value[mask * k + c] = v;
        }
    }
    for (std::size_t c = 0; c < k; ++c) a.base_value[c] = value[c];

    // |S|! (|F| - |S| - 1)! / |F|!
    std::vector<double> coalition_weight(f, 0.0);
    for (std::size_t s = 0; s < f; ++s) {
        double w = 1.0 / static_cast<double>(f);
        // 1/f * 1/C(f-1, s)
        double binom = 1.0;
        for (std::size_t i = 1; i <= s; ++i) {
            binom = binom * static_cast<double>(f - 1 - s + i) / static_cast<double>(i);
        }
        coalition_weight[s] = w / binom;
    }

    for (std::size_t j = 0; j < f; ++j) {
        const std::uint64_t bit = 1ULL << j;
        for (std::size_t c = 0; c < k; ++c) {
            double phi = 0.0;
            for (std::uint64_t mask = 0; mask < subsets; ++mask) {
                if (mask & bit) continue;
                const auto s = static_cast<std::size_t>(std::popcount(mask));
                phi += coalition_weight[s] * (value[(mask | bit) * k + c] - value[mask * k + c]);
            }
            a.phi[j * k + c] = phi;
        }
    }
    return a;
}

namespace {

GlobalImportance finish_importance(const TreeEnsemble& model, std::vector<double> sums,
                                   std::size_t samples) {
    GlobalImportance g;
    g.feature_names = model.feature_names;
    const double denom = static_cast<double>(samples) * static_cast<double>(model.n_classes);
    for (double& s : sums) s = samples == 0 ? 0.0 : s / denom;
    g.mean_abs = std::move(sums);
    g.order.resize(g.mean_abs.size());
    std::iota(g.order.begin(), g.order.end(), 0);
    std::stable_sort(g.order.begin(), g.order.end(),
                     [&](std::size_t a, std::size_t b) { return g.mean_abs[a] > g.mean_abs[b]; });
    return g;
}

void accumulate_abs(std::vector<double>& sums, const ShapAttribution& a) {
    for (std::size_t j = 0; j < a.n_features; ++j) {
        for (std::size_t c = 0; c < a.n_classes; ++c) sums[j] += std::abs(a.at(j, c));
    }
}

void check_columns(const TreeEnsemble& model, const FeatureMatrix& X) {
    if (X.cols() != model.n_features()) {
        throw Error(ErrorCode::dimension, "global_importance: feature count differs from model");
    }
}

}  // namespace

GlobalImportance global_importance_serial(const TreeEnsemble& model, const FeatureMatrix& X) {
    check_columns(model, X);
    std::vector<double> sums(model.n_features(), 0.0);
    for (std::size_t i = 0; i < X.rows(); ++i) accumulate_abs(sums, tree_shap(model, X.row(i)));
    return finish_importance(model, std::move(sums), X.rows());
}

GlobalImportance global_importance(const TreeEnsemble& model, const FeatureMatrix& X) {
    check_columns(model, X);
    require_covers(model);
    std::vector<ShapAttribution> per_sample(X.rows());
    const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        per_sample[static_cast<std::size_t>(i)] = tree_shap(model, X.row(static_cast<std::size_t>(i)));
    }
    std::vector<double> sums(model.n_features(), 0.0);
    for (const auto& a : per_sample) accumulate_abs(sums, a);
    return finish_importance(model, std::move(sums), X.rows());
}

std::vector<WaterfallRow> waterfall(const ShapAttribution& attr, std::size_t cls,
                                    std::span<const std::string> feature_names) {
    if (cls >= attr.n_classes) throw Error(ErrorCode::precondition, "waterfall: class out of range");
    std::vector<WaterfallRow> rows;
    double total = attr.base_value[cls];
    rows.push_back({-1, "base", total, total});

    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < attr.n_features; ++j) {
        if (attr.at(j, cls) != 0.0) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(attr.at(a, cls)) > std::abs(attr.at(b, cls));
    });
    for (std::size_t j : idx) {
        total += attr.at(j, cls);
        rows.push_back({static_cast<int>(j),
                        j < feature_names.size() ? feature_names[j] : "f" + std::to_string(j),
                        attr.at(j, cls), total});
    }
    return rows;
}

std::string attribution_json(const ShapAttribution& attr,
                             std::span<const std::string> feature_names) {
    nlohmann::ordered_json j;
    j["base_values"] = attr.base_value;
    auto features = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < attr.n_features; ++f) {
        std::vector<double> per_class(attr.n_classes);
        for (std::size_t c = 0; c < attr.n_classes; ++c) per_class[c] = attr.at(f, c);
        features.push_back({{"name", f < feature_names.size() ? feature_names[f] : "f" + std::to_string(f)},
                            {"phi_per_class", per_class}});
    }
    j["features"] = features;
    j["margins"] = attr.margin;
    return j.dump();
}

}  // namespace mpirisk
