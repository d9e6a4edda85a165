#pragma once

#include "mpirisk/features.hpp"
#include "mpirisk/gbdt.hpp"

#include <span>
#include <string>
#include <vector>

namespace mpirisk {

/// Per-class Shapley decomposition of the margin (pre-softmax) output.
struct ShapAttribution {
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<double> base_value;  // [class]
    std::vector<double> phi;         // [feature * n_classes + class]
    std::vector<double> margin;      // [class]

    double at(std::size_t feature, std::size_t cls) const { return phi[feature * n_classes + cls]; }
};

/// Cover-weighted expectation of one tree's output.
double expected_value(const Tree& tree);

/// Cover-weighted output of one tree when only the features in `known`
/// (bit j set = feature j known) follow x; unknown splits average over
/// children by cover.
double conditional_expectation(const Tree& tree, std::span<const double> x, std::uint64_t known);

/// Exact path-dependent Shapley values in polynomial time per tree.
/// Throws Error(precondition) if any node lacks a positive cover.
ShapAttribution tree_shap(const TreeEnsemble& model, std::span<const double> x);

/// Literal subset sum over all 2^|F| coalitions. Refuses more than 15 features.
ShapAttribution brute_force_shap(const TreeEnsemble& model, std::span<const double> x);

inline constexpr std::size_t kBruteForceMaxFeatures = 15;

struct GlobalImportance {
    std::vector<std::string> feature_names;
    /// Mean |phi| over samples and classes.
    std::vector<double> mean_abs;
    /// Feature indices by descending mean_abs, ties to the lower index.
    std::vector<std::size_t> order;
};

GlobalImportance global_importance_serial(const TreeEnsemble& model, const FeatureMatrix& X);
/// Per-sample attributions in parallel, aggregated in sample order; matches
/// the serial result bit for bit.
GlobalImportance global_importance(const TreeEnsemble& model, const FeatureMatrix& X);

struct WaterfallRow {
    int feature = -1;  // -1 for the base row
    std::string name;
    double contribution = 0.0;
    double running_total = 0.0;
};

/// Base row followed by every non-zero contribution ordered by |phi|
/// descending (ties to the lower feature index). The last running total is
/// the margin.
std::vector<WaterfallRow> waterfall(const ShapAttribution& attr, std::size_t cls,
                                    std::span<const std::string> feature_names);

/// {"base_values": [...], "features": [{"name", "phi_per_class"}], "margins": [...]}
std::string attribution_json(const ShapAttribution& attr,
                             std::span<const std::string> feature_names);

}  // namespace mpirisk
