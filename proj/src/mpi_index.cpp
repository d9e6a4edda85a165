#include "mpirisk/mpi_index.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/features.hpp"
#include "mpirisk/text.hpp"

#include <algorithm>
#include <cmath>

namespace mpirisk {

std::string_view condition_name(Condition c) {
    switch (c) {
        case Condition::aod: return "aod_high";
        case Condition::temperature: return "temp_high";
        case Condition::humidity: return "humidity_high";
        case Condition::wind_speed: return "wind_high";
        case Condition::irr_var: return "irr_var_high";
    }
    return "unknown";
}

std::string_view label_name(RiskLabel l) {
    switch (l) {
        case RiskLabel::Low: return "Low";
        case RiskLabel::Medium: return "Medium";
        case RiskLabel::High: return "High";
    }
    return "unknown";
}

std::optional<RiskLabel> parse_label(std::string_view name) {
    if (name == "Low") return RiskLabel::Low;
    if (name == "Medium") return RiskLabel::Medium;
    if (name == "High") return RiskLabel::High;
    return std::nullopt;
}

void MpiConfig::check() const {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::precondition, "MPI config: weights must be finite and >= 0");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::precondition,
                    "MPI config: weights sum to " + format_double(sum) + ", expected 1");
    }
    if (!(band_edges.low_upper > 0.0 && band_edges.low_upper <= band_edges.high_lower &&
          band_edges.high_lower < 1.0)) {
        throw Error(ErrorCode::precondition,
                    "MPI config: band edges must satisfy 0 < low_upper <= high_lower < 1");
    }
    const auto& t = thresholds;
    for (double v : {t.aod, t.temperature, t.humidity, t.wind_speed}) {
        if (!std::isfinite(v)) throw Error(ErrorCode::precondition, "MPI config: non-finite threshold");
    }
    if (!(t.irr_var_percentile > 0.0 && t.irr_var_percentile < 100.0)) {
        throw Error(ErrorCode::precondition, "MPI config: irr_var percentile must be in (0, 100)");
    }
    if (t.irr_var_absolute && !std::isfinite(*t.irr_var_absolute)) {
        throw Error(ErrorCode::precondition, "MPI config: non-finite irr_var threshold");
    }
}

std::vector<double> irr_variability(const EnvSeries& series) {
    if (series.size() < 3) {
        throw Error(ErrorCode::precondition, "irr_variability: needs at least 3 days");
    }
    std::vector<double> irr;
    irr.reserve(series.size());
    for (const auto& r : series.records) irr.push_back(r.solar_irradiance);
    return rolling_stat(irr, 3, RollingStat::std);
}

double resolve_irr_threshold(std::span<const double> values, double percentile_rank) {
    if (values.empty()) throw Error(ErrorCode::precondition, "percentile of empty sample");
    if (!(percentile_rank > 0.0 && percentile_rank < 100.0)) {
        throw Error(ErrorCode::precondition, "percentile rank must be in (0, 100)");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = static_cast<double>(sorted.size() - 1) * percentile_rank / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ResolvedThresholds resolve_thresholds(const MpiConfig& config,
                                      std::span<const double> irr_var_history) {
    const auto& t = config.thresholds;
    const double irr = t.irr_var_absolute
                           ? *t.irr_var_absolute
                           : resolve_irr_threshold(irr_var_history, t.irr_var_percentile);
    return {t.aod, t.temperature, t.humidity, t.wind_speed, irr};
}

TriggerVector compute_triggers(const EnvRecord& day, double irr_var,
                               const ResolvedThresholds& t) {
    TriggerVector v;
    v.values = {day.aod, day.temperature, day.humidity, day.wind_speed, irr_var};
    const std::array<double, kConditionCount> cut{t.aod, t.temperature, t.humidity, t.wind_speed,
                                                  t.irr_var};
    for (std::size_t i = 0; i < kConditionCount; ++i) v.fired[i] = v.values[i] > cut[i];
    return v;
}

double compute_mpi(const TriggerVector& triggers, const Weights& weights) {
    double score = 0.0;
    for (std::size_t i = 0; i < kConditionCount; ++i) {
        if (triggers.fired[i]) score += weights[i];
    }
    return score;
}

std::array<double, kConditionCount> exceedance_frequencies(const EnvSeries& series,
                                                           const ResolvedThresholds& thresholds) {
    const auto irr = irr_variability(series);
    std::array<double, kConditionCount> counts{};
    for (std::size_t i = 0; i < irr.size(); ++i) {
        const auto tv = compute_triggers(series.records[i + 2], irr[i], thresholds);
        for (std::size_t c = 0; c < kConditionCount; ++c) counts[c] += tv.fired[c] ? 1.0 : 0.0;
    }
    for (double& c : counts) c /= static_cast<double>(irr.size());
    return counts;
}

Weights eof_weights(const std::array<double, kConditionCount>& frequencies) {
    std::string never;
    double sum = 0.0;
    for (std::size_t c = 0; c < kConditionCount; ++c) {
        if (!(frequencies[c] > 0.0)) {
            if (!never.empty()) never += ", ";
            never += condition_name(static_cast<Condition>(c));
        }
        sum += frequencies[c];
    }
    if (!never.empty()) {
        throw Error(ErrorCode::degenerate, "EOF weights: condition never observed: " + never);
    }
    Weights w{};
    for (std::size_t c = 0; c < kConditionCount; ++c) w[c] = frequencies[c] / sum;
    return w;
}

Weights derive_eof_weights(const EnvSeries& series, const MpiConfig& config) {
    if (series.size() < 30) {
        throw Error(ErrorCode::precondition, "derive_eof_weights: needs at least 30 days");
    }
    require_valid(series, "derive_eof_weights");
    const auto irr = irr_variability(series);
    return eof_weights(exceedance_frequencies(series, resolve_thresholds(config, irr)));
}

RiskLabel label_risk(double score, const BandEdges& edges) {
    if (score >= edges.high_lower) return RiskLabel::High;
    if (score >= edges.low_upper) return RiskLabel::Medium;
    return RiskLabel::Low;
}

BandEdges percentile_band_edges(std::span<const double> training_scores) {
    return {resolve_irr_threshold(training_scores, 50.0),
            resolve_irr_threshold(training_scores, 75.0)};
}

std::vector<MpiScore> score_days(std::span<const EnvRecord> days, std::span<const double> irr_var,
                                 const ResolvedThresholds& thresholds, const Weights& weights,
                                 const BandEdges& edges) {
    if (days.size() != irr_var.size()) {
        throw Error(ErrorCode::dimension, "score_days: irr_var length differs from days");
    }
    std::vector<MpiScore> out;
    out.reserve(days.size());
    for (std::size_t i = 0; i < days.size(); ++i) {
        MpiScore s;
        s.date = days[i].date;
        s.triggers = compute_triggers(days[i], irr_var[i], thresholds);
        s.score = compute_mpi(s.triggers, weights);
        s.label = label_risk(s.score, edges);
        out.push_back(s);
    }
    return out;
}

std::vector<MpiScore> score_series(const EnvSeries& series, const MpiConfig& config) {
    config.check();
    require_valid(series, "score_series");
    const auto irr = irr_variability(series);
    const auto thresholds = resolve_thresholds(config, irr);
    const auto days = std::span<const EnvRecord>(series.records).subspan(2);
    auto scores = score_days(days, irr, thresholds, config.weights, config.band_edges);
    if (config.band_mode == BandMode::percentile) {
        std::vector<double> values;
        values.reserve(scores.size());
        for (const auto& s : scores) values.push_back(s.score);
        const auto edges = percentile_band_edges(values);
        for (auto& s : scores) s.label = label_risk(s.score, edges);
    }
    return scores;
}

std::vector<WeeklyPoint> weekly_resample(std::span<const Date> dates,
                                         std::span<const double> values,
                                         std::optional<Date> anchor) {
    if (dates.size() != values.size()) {
        throw Error(ErrorCode::dimension, "weekly_resample: dates and values differ in length");
    }
    std::vector<WeeklyPoint> out;
    if (dates.empty()) return out;
    const Date start = anchor.value_or(dates.front());
    const Date last = dates.back();

    std::size_t i = 0;
    while (i < dates.size() && dates[i] < start) ++i;
    for (Date week = start; week + 6 <= last; week = week + 7) {
        double sum = 0.0;
        std::size_t n = 0;
        while (i < dates.size() && dates[i] <= week + 6) {
            sum += values[i];
            ++n;
            ++i;
        }
        if (n > 0) out.push_back({week, sum / static_cast<double>(n)});
    }
    return out;
}

std::vector<WeeklyPoint> weekly_resample(std::span<const MpiScore> scores) {
    std::vector<Date> dates;
    std::vector<double> values;
    for (const auto& s : scores) {
        dates.push_back(s.date);
        values.push_back(s.score);
    }
    return weekly_resample(dates, values);
}

std::string scores_csv(std::span<const MpiScore> scores) {
    std::string out = "date,score,label\n";
    for (const auto& s : scores) {
        out += s.date.iso() + "," + format_double(s.score) + "," + std::string(label_name(s.label)) +
               "\n";
    }
    return out;
}

std::vector<MpiScore> parse_scores_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "date,score,label") {
        throw Error(ErrorCode::schema, "scores CSV header must be 'date,score,label'");
    }
    std::vector<MpiScore> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != 3) throw ParseError(ErrorCode::row, i + 1, "expected 3 cells");
        MpiScore s;
        try {
            s.date = Date::parse_iso(cells[0]);
        } catch (const Error& e) {
            throw ParseError(ErrorCode::row, i + 1, e.what());
        }
        if (!parse_double(cells[1], s.score)) {
            throw ParseError(ErrorCode::row, i + 1, "cannot parse score");
        }
        const auto label = parse_label(cells[2]);
        if (!label) throw ParseError(ErrorCode::row, i + 1, "unknown label '" + std::string(cells[2]) + "'");
        s.label = *label;
        out.push_back(s);
    }
    return out;
}

}  // namespace mpirisk
