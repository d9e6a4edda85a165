#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpirisk {

/// counts[true * k + predicted]
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::size_t> counts;

    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * k + predicted]; }
    std::size_t total() const;
    std::size_t row_sum(std::size_t c) const;
    std::size_t col_sum(std::size_t c) const;
};

/// Throws Error(precondition) on empty or mismatched input, or labels outside [0, k).
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t k);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    /// Set when a zero denominator forced a metric to 0.
    bool undefined = false;
};

struct AveragedMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassificationReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    AveragedMetrics macro;
    AveragedMetrics weighted;  // by true-class support
    std::size_t total = 0;
};

ClassificationReport report(const ConfusionMatrix& cm);

struct RegressionMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    /// Empty when y_true is constant.
    std::optional<double> r2;
};

RegressionMetrics regression(std::span<const double> y_true, std::span<const double> y_pred);

std::string report_json(const ClassificationReport& r, const ConfusionMatrix& cm,
                        std::span<const std::string> class_names);
/// Fixed-width table: one row per class, then accuracy, macro and weighted averages.
std::string report_table(const ClassificationReport& r, std::span<const std::string> class_names);
std::string regression_json(const RegressionMetrics& m, std::size_t n);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-class shuffled split; each class contributes round(fraction * count)
/// rows to test. Both index lists come back sorted.
Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

}  // namespace mpirisk
