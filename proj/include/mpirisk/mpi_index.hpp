#pragma once

#include "mpirisk/date.hpp"
#include "mpirisk/ingest.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mpirisk {

/// The five risk conditions, in weight order.
enum class Condition { aod, temperature, humidity, wind_speed, irr_var };
inline constexpr std::size_t kConditionCount = 5;
std::string_view condition_name(Condition c);

using Weights = std::array<double, kConditionCount>;

struct Thresholds {
    double aod = 0.9;
    double temperature = 35.0;
    double humidity = 70.0;
    double wind_speed = 5.0;
    /// Percentile rank of the 3-day irradiance std used as its cut.
    double irr_var_percentile = 90.0;
    /// Absolute cut; once resolved from training data it is stored here and
    /// takes precedence over the percentile.
    std::optional<double> irr_var_absolute;
    bool operator==(const Thresholds&) const = default;
};

/// Absolute cut for every condition.
struct ResolvedThresholds {
    double aod;
    double temperature;
    double humidity;
    double wind_speed;
    double irr_var;
};

struct BandEdges {
    double low_upper = 0.3;
    double high_lower = 0.6;
    bool operator==(const BandEdges&) const = default;
};

enum class BandMode { fixed, percentile };

struct MpiConfig {
    Thresholds thresholds;
    Weights weights{0.35, 0.25, 0.20, 0.15, 0.05};
    BandEdges band_edges;
    BandMode band_mode = BandMode::fixed;

    /// Throws Error(precondition) unless weights are non-negative and sum to
    /// 1 within 1e-9, 0 < low_upper <= high_lower < 1, and thresholds are finite.
    void check() const;
    bool operator==(const MpiConfig&) const = default;
};

struct TriggerVector {
    std::array<bool, kConditionCount> fired{};
    std::array<double, kConditionCount> values{};

    bool operator[](Condition c) const { return fired[static_cast<std::size_t>(c)]; }
};

enum class RiskLabel { Low = 0, Medium = 1, High = 2 };
std::string_view label_name(RiskLabel l);
std::optional<RiskLabel> parse_label(std::string_view name);

struct MpiScore {
    Date date;
    double score = 0.0;
    RiskLabel label = RiskLabel::Low;
    TriggerVector triggers;
};

/// Trailing 3-day sample std of irradiance; output is two shorter than the input.
/// Throws Error(precondition) for fewer than 3 days.
std::vector<double> irr_variability(const EnvSeries& series);

/// Empirical percentile with linear interpolation between order statistics
/// (position (n - 1) * rank / 100 in the sorted sample).
double resolve_irr_threshold(std::span<const double> values, double percentile_rank);

/// Absolute thresholds, resolving the irradiance-variability cut from
/// `irr_var_history` unless the config already carries an absolute value.
ResolvedThresholds resolve_thresholds(const MpiConfig& config,
                                      std::span<const double> irr_var_history);

/// Each flag is value > threshold; equality does not fire.
TriggerVector compute_triggers(const EnvRecord& day, double irr_var,
                               const ResolvedThresholds& thresholds);

/// Weighted sum of fired triggers.
double compute_mpi(const TriggerVector& triggers, const Weights& weights);

/// Share of days on which each condition fires. `irr_var` aligns with
/// records[2..].
std::array<double, kConditionCount> exceedance_frequencies(const EnvSeries& series,
                                                           const ResolvedThresholds& thresholds);

/// Frequencies normalized to sum to one. Throws Error(degenerate) naming any
/// condition with zero frequency.
Weights eof_weights(const std::array<double, kConditionCount>& frequencies);

/// Needs at least 30 days.
Weights derive_eof_weights(const EnvSeries& series, const MpiConfig& config);

RiskLabel label_risk(double score, const BandEdges& edges);

/// Percentile-mode edges: low_upper at the 50th and high_lower at the 75th
/// percentile of the training score distribution.
BandEdges percentile_band_edges(std::span<const double> training_scores);

/// Scores every day from the third onward (the first two lack irradiance
/// variability). In percentile mode, edges come from the scores themselves.
std::vector<MpiScore> score_series(const EnvSeries& series, const MpiConfig& config);

/// Scores explicit days. `irr_var[i]` belongs to `days[i]`.
std::vector<MpiScore> score_days(std::span<const EnvRecord> days, std::span<const double> irr_var,
                                 const ResolvedThresholds& thresholds, const Weights& weights,
                                 const BandEdges& edges);

struct WeeklyPoint {
    Date week_start;
    double value;
};

/// Means over consecutive 7-day blocks anchored at `anchor` (default: the
/// first date). A block is emitted only when its last day is on or before the
/// last date; days missing inside a block are skipped, empty blocks omitted.
std::vector<WeeklyPoint> weekly_resample(std::span<const Date> dates,
                                         std::span<const double> values,
                                         std::optional<Date> anchor = std::nullopt);

std::vector<WeeklyPoint> weekly_resample(std::span<const MpiScore> scores);

/// `date,score,label`
std::string scores_csv(std::span<const MpiScore> scores);
std::vector<MpiScore> parse_scores_csv(std::string_view text);

}  // namespace mpirisk
