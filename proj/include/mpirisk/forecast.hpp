#pragma once

#include "mpirisk/date.hpp"
#include "mpirisk/explain.hpp"
#include "mpirisk/features.hpp"
#include "mpirisk/mpi_index.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpirisk {

struct ForecastConfig {
    int n_changepoints = 25;
    /// Share of history over which changepoints are placed.
    double changepoint_range = 0.8;
    int yearly_order = 10;
    double period_weeks = 365.25 / 7.0;
    double trend_l2 = 10.0;
    double regressor_l2 = 1.0;
    double seasonality_l2 = 0.0;
    double interval_level = 0.80;

    void check() const;
    bool operator==(const ForecastConfig&) const = default;
};

struct WeeklySeries {
    std::vector<Date> weeks;
    std::vector<double> values;
};

/// One exogenous regressor sampled on the same weeks as the target.
struct Regressor {
    std::string name;
    std::vector<double> values;
};

/// y(t) = trend(t) + seasonal(t) + sum beta_r * (x_r(t) - mean_r) / scale_r,
/// with t in weeks since `origin`. The holiday term is identically zero.
struct ForecastModel {
    ForecastConfig config;
    Date origin;

    double intercept = 0.0;
    double slope = 0.0;
    std::vector<double> changepoints;  // t positions
    std::vector<double> deltas;        // slope change at each changepoint
    std::vector<double> fourier;       // cos_1, sin_1, cos_2, sin_2, ...

    std::vector<std::string> regressor_names;
    std::vector<double> regressor_mean;
    std::vector<double> regressor_scale;
    std::vector<double> beta;

    double residual_sigma = 0.0;

    // Training data, kept so the model can be re-fit on re-scored targets
    // and so the last regressor values can be forward-filled.
    WeeklySeries history;
    std::vector<Regressor> history_regressors;
    std::vector<double> fitted;

    double trend_at(double t) const;
    double seasonal_at(double t) const;
    double time_of(Date week) const { return static_cast<double>(week - origin) / 7.0; }
};

struct ForecastPoint {
    Date week_start;
    double yhat = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double trend = 0.0;
    double seasonal = 0.0;
    double regressors = 0.0;
};

struct ForecastResult {
    double interval_level = 0.8;
    std::vector<ForecastPoint> points;
};

/// Ridge least squares over [trend | Fourier | regressors]. Needs at least
/// 2 * (n_changepoints + 2) weeks and regressors aligned with `y`.
ForecastModel fit(const WeeklySeries& y, std::span<const Regressor> regressors,
                  const ForecastConfig& config);

/// Re-fits `model`'s configuration and regressors on a new target over the same weeks.
ForecastModel refit(const ForecastModel& model, std::span<const double> new_y);

/// Two-sided normal quantile: z such that P(|Z| <= z) = level.
double z_for_level(double level);

/// Forecast `horizon` weeks past the last training week with the last
/// observed regressor values carried forward.
ForecastResult predict(const ForecastModel& model, int horizon);

/// Forecast with caller-supplied future regressor values, one series per
/// model regressor, each at least `horizon` long.
ForecastResult predict_with_regressors(const ForecastModel& model, int horizon,
                                       std::span<const Regressor> future);

/// Components of the fit over the training weeks.
ForecastResult in_sample(const ForecastModel& model);

inline constexpr std::size_t kDefaultRegressorCount = 4;

/// Highest-ranked variant of each base meteorological variable, best first,
/// at most k entries.
std::vector<std::string> select_regressors(const GlobalImportance& importance, std::size_t k);

/// Weekly target and regressors over the days present in both inputs,
/// blocks anchored at the first shared date.
struct WeeklyDataset {
    WeeklySeries y;
    std::vector<Regressor> regressors;
};
WeeklyDataset align_weekly(std::span<const Date> score_dates, std::span<const double> scores,
                           const FeatureMatrix& daily_regressors,
                           std::span<const std::string> names);

/// `week_start,yhat,lower,upper,trend,seasonal,regressors`
std::string forecast_csv(const ForecastResult& result);
std::string forecast_json(const ForecastResult& result);

std::string forecast_model_to_json(const ForecastModel& model);
ForecastModel forecast_model_from_json(std::string_view text);

// ---------------------------------------------------------------- decomposition

/// Classical additive decomposition. trend and residual are NaN outside
/// [first, last], the indices where the centered moving average exists.
struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
    std::size_t first = 0;
    std::size_t last = 0;
};

/// Even periods use the 2 x period moving average (half weights at both ends).
/// Throws Error(precondition) when values.size() < 2 * period.
Decomposition decompose(std::span<const double> values, int period = 30);

}  // namespace mpirisk
