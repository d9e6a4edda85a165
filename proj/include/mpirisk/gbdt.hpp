#pragma once

#include "mpirisk/features.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpirisk {

/// Internal when feature >= 0 (go left iff x[feature] < threshold), leaf otherwise.
/// `value` on leaves is already scaled by the learning rate.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    /// Training sample weight that reached this node.
    double cover = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// Node 0 is the root.
struct Tree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_for(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return nodes[leaf_for(x)].value; }
    int depth() const;
    bool operator==(const Tree&) const = default;
};

enum class Execution { serial, parallel };

struct TrainParams {
    int n_rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    double l2_leaf_reg = 1.0;
    double min_child_weight = 1.0;
    double feature_subsample = 1.0;
    std::uint64_t seed = 0;
    /// 0 infers max(label) + 1.
    int n_classes = 0;
    Execution execution = Execution::parallel;

    void check() const;
    bool operator==(const TrainParams&) const = default;
};

struct TreeEnsemble {
    int n_classes = 0;
    std::vector<std::string> feature_names;
    /// Per-class prior log-probability.
    std::vector<double> base_score;
    /// rounds[r][k] is the tree for class k in round r.
    std::vector<std::vector<Tree>> rounds;
    double learning_rate = 0.1;
    TrainParams params;

    std::size_t n_features() const { return feature_names.size(); }
    /// Throws Error(precondition) when rounds are not rectangular or n_classes < 2.
    void check() const;
    bool operator==(const TreeEnsemble&) const = default;
};

struct TrainTrace {
    /// Weighted multiclass log-loss on the training set; entry r is the loss
    /// after r rounds (entry 0 is the prior).
    std::vector<double> log_loss;
};

/// Softmax gradient boosting with exact greedy splits.
/// Throws Error(precondition) on empty X, length mismatch or a single class.
TreeEnsemble train(const FeatureMatrix& X, std::span<const int> y, const TrainParams& params,
                   std::span<const double> sample_weight = {}, TrainTrace* trace = nullptr);

/// Base score plus every tree's leaf value per class. `rounds` limits the
/// sum to the first n rounds.
std::vector<double> predict_margin(const TreeEnsemble& model, std::span<const double> x,
                                   std::optional<std::size_t> rounds = std::nullopt);

std::vector<double> softmax(std::span<const double> margins);
std::vector<double> predict_proba(const TreeEnsemble& model, std::span<const double> x);
/// Argmax of margins, ties to the lowest class.
int predict_class(const TreeEnsemble& model, std::span<const double> x);

/// Versioned JSON with explicit node arrays.
std::string model_to_json(const TreeEnsemble& model);
TreeEnsemble model_from_json(std::string_view text);

// ---------------------------------------------------------------- kernels

/// Rows of one node for one feature, ordered by feature value.
struct SplitInput {
    std::span<const double> column;       // full feature column
    std::span<const std::uint32_t> rows;  // node rows sorted by column value
};

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool valid() const { return feature >= 0; }
};

struct SplitContext {
    std::span<const double> grad;
    std::span<const double> hess;
    double l2 = 1.0;
    double min_child_weight = 1.0;
};

SplitCandidate best_split_for_feature(int feature, const SplitInput& input,
                                      const SplitContext& ctx);

/// Best split over features; ties go to the lowest feature index, then the
/// lowest threshold. Gains within a relative 1e-10 of each other are ties. Both variants return identical results.
SplitCandidate find_best_split_serial(std::span<const int> features,
                                      std::span<const SplitInput> inputs,
                                      const SplitContext& ctx);
SplitCandidate find_best_split_parallel(std::span<const int> features,
                                        std::span<const SplitInput> inputs,
                                        const SplitContext& ctx);

}  // namespace mpirisk
