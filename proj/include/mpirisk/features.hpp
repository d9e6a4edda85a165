#pragma once

#include "mpirisk/date.hpp"
#include "mpirisk/ingest.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpirisk {

enum class Variable { aod, temperature, humidity, wind_speed, solar_irradiance };

inline constexpr Variable kAllVariables[] = {Variable::aod, Variable::temperature,
                                             Variable::humidity, Variable::wind_speed,
                                             Variable::solar_irradiance};

std::string_view variable_name(Variable v);
std::optional<Variable> parse_variable(std::string_view name);
double value_of(const EnvRecord& r, Variable v);

enum class RollingStat { mean, std };

struct MinMax {
    double min = 0.0;
    double max = 0.0;
    bool operator==(const MinMax&) const = default;
};

/// Observed range of `values`. Throws Error(precondition) on empty or non-finite input.
MinMax minmax_fit(std::span<const double> values);

/// (x - min) / (max - min); 0 when max == min. Not clipped.
double minmax_apply(const MinMax& range, double x);

/// Trailing window statistic, emitted only where the full window exists, so
/// the output has values.size() - window + 1 entries (or none). std uses n - 1.
std::vector<double> rolling_stat(std::span<const double> values, int window, RollingStat stat);

struct RollingFeature {
    Variable variable;
    int window;
    RollingStat stat;
    bool operator==(const RollingFeature&) const = default;
};

struct LagFeature {
    Variable variable;
    int lag;
    bool operator==(const LagFeature&) const = default;
};

/// Column layout: immediate, rolling, lags, then month.
struct FeatureSpec {
    std::vector<Variable> immediate;
    std::vector<RollingFeature> rolling;
    std::vector<LagFeature> lags;
    /// Immediate columns replaced by 1 - scaled value.
    std::vector<Variable> directional;
    bool include_month = true;

    /// Five immediate variables, 3/7-day mean and std of AOD and irradiance, month.
    static FeatureSpec defaults();

    void check() const;
    std::vector<std::string> column_names() const;
    /// Number of leading days without a complete window or lag.
    int lookback() const;

    bool operator==(const FeatureSpec&) const = default;
};

/// Dense row-major matrix of features aligned to dates.
struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<std::string> feature_names;
    std::vector<double> values;

    std::size_t rows() const { return dates.size(); }
    std::size_t cols() const { return feature_names.size(); }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * cols(), cols()};
    }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
    std::vector<double> column(std::size_t j) const;
    std::optional<std::size_t> column_index(std::string_view name) const;

    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
};

/// Per-column ranges for every scaled column (all but month).
struct ScalerParams {
    std::vector<std::string> names;
    std::vector<MinMax> ranges;
    bool operator==(const ScalerParams&) const = default;
};

/// Unscaled features; month is the raw 1..12 value. Rows whose window or lag
/// would reach a missing day are dropped.
FeatureMatrix raw_feature_matrix(const EnvSeries& series, const FeatureSpec& spec);

/// Fits ranges on the rows of `raw` dated on or before `train_end` (all rows
/// when unset).
ScalerParams fit_scaler(const FeatureMatrix& raw, std::optional<Date> train_end = std::nullopt);

/// Scaled features ready for the classifier. Month maps to (m - 1) / 11.
FeatureMatrix build_feature_matrix(const EnvSeries& series, const FeatureSpec& spec,
                                   const ScalerParams& params);

/// `date,<feature names...>` with shortest round-trip numbers.
std::string feature_matrix_csv(const FeatureMatrix& m);
FeatureMatrix parse_feature_csv(std::string_view text);

}  // namespace mpirisk
