#include "mpirisk/forecast.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/text.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace mpirisk {

void ForecastConfig::check() const {
    if (n_changepoints < 0 || yearly_order < 1 || !(period_weeks > 0.0) ||
        !(changepoint_range > 0.0 && changepoint_range <= 1.0)) {
        throw Error(ErrorCode::precondition,
                    "forecast config: need n_changepoints >= 0, yearly_order >= 1, period > 0, "
                    "changepoint_range in (0, 1]");
    }
    if (!(trend_l2 >= 0.0) || !(regressor_l2 >= 0.0) || !(seasonality_l2 >= 0.0)) {
        throw Error(ErrorCode::precondition, "forecast config: penalties must be >= 0");
    }
    if (!(interval_level > 0.0 && interval_level < 1.0)) {
        throw Error(ErrorCode::precondition, "forecast config: interval_level must be in (0, 1)");
    }
}

double ForecastModel::trend_at(double t) const {
    double g = intercept + slope * t;
    for (std::size_t j = 0; j < changepoints.size(); ++j) {
        if (t > changepoints[j]) g += deltas[j] * (t - changepoints[j]);
    }
    return g;
}

double ForecastModel::seasonal_at(double t) const {
    double s = 0.0;
    for (std::size_t n = 0; n < fourier.size() / 2; ++n) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(n + 1) * t / config.period_weeks;
        s += fourier[2 * n] * std::cos(angle) + fourier[2 * n + 1] * std::sin(angle);
    }
    return s;
}

namespace {

double regressor_term(const ForecastModel& m, std::span<const double> x) {
    double r = 0.0;
    for (std::size_t j = 0; j < m.beta.size(); ++j) {
        r += m.beta[j] * (x[j] - m.regressor_mean[j]) / m.regressor_scale[j];
    }
    return r;
}

ForecastPoint make_point(const ForecastModel& m, Date week, std::span<const double> x, double z) {
    ForecastPoint p;
    p.week_start = week;
    const double t = m.time_of(week);
    p.trend = m.trend_at(t);
    p.seasonal = m.seasonal_at(t);
    p.regressors = regressor_term(m, x);
    p.yhat = p.trend + p.seasonal + p.regressors;
    p.lower = p.yhat - z * m.residual_sigma;
    p.upper = p.yhat + z * m.residual_sigma;
    return p;
}

}  // namespace

ForecastModel fit(const WeeklySeries& y, std::span<const Regressor> regressors,
                  const ForecastConfig& config) {
    config.check();
    const std::size_t n = y.values.size();
    if (y.weeks.size() != n) throw Error(ErrorCode::precondition, "fit: weeks and values differ in length");
    const auto min_weeks = static_cast<std::size_t>(2 * (config.n_changepoints + 2));
    if (n < min_weeks) {
        throw Error(ErrorCode::precondition, "fit: need at least " + std::to_string(min_weeks) +
                                                 " weeks, got " + std::to_string(n));
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(y.weeks[i - 1] < y.weeks[i])) {
            throw Error(ErrorCode::precondition, "fit: weeks must be strictly increasing");
        }
    }
    for (const auto& r : regressors) {
        if (r.values.size() != n) {
            throw Error(ErrorCode::precondition, "fit: regressor '" + r.name + "' is not aligned with y");
        }
    }
    for (double v : y.values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::precondition, "fit: non-finite target");
    }

    ForecastModel m;
    m.config = config;
    m.origin = y.weeks.front();
    m.history = y;
    m.history_regressors.assign(regressors.begin(), regressors.end());

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = m.time_of(y.weeks[i]);

    // Changepoints at evenly spaced history indices within the first share of data.
    const auto cps = static_cast<std::size_t>(config.n_changepoints);
    if (cps > 0) {
        const auto hist = static_cast<std::size_t>(
            std::floor(static_cast<double>(n) * config.changepoint_range));
        for (std::size_t j = 1; j <= cps; ++j) {
            const auto idx = static_cast<std::size_t>(std::lround(
                static_cast<double>(j) * static_cast<double>(hist - 1) / static_cast<double>(cps)));
            m.changepoints.push_back(t[idx]);
        }
    }

    for (const auto& r : regressors) {
        double mean = 0.0;
        for (double v : r.values) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : r.values) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        m.regressor_names.push_back(r.name);
        m.regressor_mean.push_back(mean);
        m.regressor_scale.push_back(sd > 0.0 ? sd : 1.0);
    }

    const std::size_t order = static_cast<std::size_t>(config.yearly_order);
    const std::size_t n_reg = regressors.size();
    const std::size_t cols = 2 + cps + 2 * order + n_reg;

    std::vector<double> penalty(cols, 0.0);
    for (std::size_t j = 0; j < cps; ++j) penalty[2 + j] = config.trend_l2;
    for (std::size_t j = 0; j < 2 * order; ++j) penalty[2 + cps + j] = config.seasonality_l2;
    for (std::size_t j = 0; j < n_reg; ++j) penalty[2 + cps + 2 * order + j] = config.regressor_l2;
    const auto penalized = static_cast<std::size_t>(
        std::count_if(penalty.begin(), penalty.end(), [](double p) { return p > 0.0; }));

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n + penalized),
                                              static_cast<Eigen::Index>(cols));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n + penalized));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        a(row, 0) = 1.0;
        a(row, 1) = t[i];
        for (std::size_t j = 0; j < cps; ++j) {
            a(row, static_cast<Eigen::Index>(2 + j)) = std::max(0.0, t[i] - m.changepoints[j]);
        }
        for (std::size_t k = 0; k < order; ++k) {
            const double angle =
                2.0 * std::numbers::pi * static_cast<double>(k + 1) * t[i] / config.period_weeks;
            a(row, static_cast<Eigen::Index>(2 + cps + 2 * k)) = std::cos(angle);
            a(row, static_cast<Eigen::Index>(2 + cps + 2 * k + 1)) = std::sin(angle);
        }
        for (std::size_t j = 0; j < n_reg; ++j) {
            a(row, static_cast<Eigen::Index>(2 + cps + 2 * order + j)) =
                (regressors[j].values[i] - m.regressor_mean[j]) / m.regressor_scale[j];
        }
        b(row) = y.values[i];
    }
    std::size_t extra = n;
    for (std::size_t j = 0; j < cols; ++j) {
        if (penalty[j] > 0.0) {
            a(static_cast<Eigen::Index>(extra++), static_cast<Eigen::Index>(j)) = std::sqrt(penalty[j]);
        }
    }

    const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);
    m.intercept = coef(0);
    m.slope = coef(1);
    for (std::size_t j = 0; j < cps; ++j) m.deltas.push_back(coef(static_cast<Eigen::Index>(2 + j)));
    for (std::size_t j = 0; j < 2 * order; ++j) {
        m.fourier.push_back(coef(static_cast<Eigen::Index>(2 + cps + j)));
    }
    for (std::size_t j = 0; j < n_reg; ++j) {
        m.beta.push_back(coef(static_cast<Eigen::Index>(2 + cps + 2 * order + j)));
    }

    double ss = 0.0;
    std::vector<double> x(n_reg);
    m.fitted.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n_reg; ++j) x[j] = regressors[j].values[i];
        m.fitted[i] = m.trend_at(t[i]) + m.seasonal_at(t[i]) + regressor_term(m, x);
        const double r = y.values[i] - m.fitted[i];
        ss += r * r;
    }
    m.residual_sigma = std::sqrt(ss / static_cast<double>(n));
    return m;
}

ForecastModel refit(const ForecastModel& model, std::span<const double> new_y) {
    WeeklySeries y{model.history.weeks, {new_y.begin(), new_y.end()}};
    return fit(y, model.history_regressors, model.config);
}

double z_for_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw Error(ErrorCode::precondition, "interval level must be in (0, 1)");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}

ForecastResult predict(const ForecastModel& model, int horizon) {
    std::vector<Regressor> future;
    for (const auto& r : model.history_regressors) {
        future.push_back({r.name, std::vector<double>(static_cast<std::size_t>(std::max(0, horizon)),
                                                      r.values.back())});
    }
    return predict_with_regressors(model, horizon, future);
}

ForecastResult predict_with_regressors(const ForecastModel& model, int horizon,
                                       std::span<const Regressor> future) {
    if (horizon <= 0) throw Error(ErrorCode::precondition, "predict: horizon must be positive");
    if (future.size() != model.beta.size()) {
        throw Error(ErrorCode::precondition, "predict: expected " + std::to_string(model.beta.size()) +
                                                 " future regressors");
    }
    for (const auto& r : future) {
        if (r.values.size() < static_cast<std::size_t>(horizon)) {
            throw Error(ErrorCode::precondition, "predict: regressor '" + r.name + "' shorter than horizon");
        }
    }
    ForecastResult out;
    out.interval_level = model.config.interval_level;
    const double z = z_for_level(model.config.interval_level);
    const Date last = model.history.weeks.back();
    std::vector<double> x(future.size());
    for (int h = 1; h <= horizon; ++h) {
        for (std::size_t j = 0; j < future.size(); ++j) {
            x[j] = future[j].values[static_cast<std::size_t>(h - 1)];
        }
        out.points.push_back(make_point(model, last + 7 * h, x, z));
    }
    return out;
}

ForecastResult in_sample(const ForecastModel& model) {
    ForecastResult out;
    out.interval_level = model.config.interval_level;
    const double z = z_for_level(model.config.interval_level);
    std::vector<double> x(model.history_regressors.size());
    for (std::size_t i = 0; i < model.history.weeks.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = model.history_regressors[j].values[i];
        out.points.push_back(make_point(model, model.history.weeks[i], x, z));
    }
    return out;
}

std::vector<std::string> select_regressors(const GlobalImportance& importance, std::size_t k) {
    std::vector<std::string> chosen;
    std::vector<Variable> seen;
    for (std::size_t idx : importance.order) {
        if (chosen.size() >= k) break;
        const auto& name = importance.feature_names[idx];
        for (Variable v : kAllVariables) {
            const auto base = variable_name(v);
            const bool match = name == base || (name.size() > base.size() &&
                                                 name.compare(0, base.size(), base) == 0 &&
                                                 name[base.size()] == '_');
            if (!match) continue;
            if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
                seen.push_back(v);
                chosen.push_back(name);
            }
            break;
        }
    }
    return chosen;
}

WeeklyDataset align_weekly(std::span<const Date> score_dates, std::span<const double> scores,
                           const FeatureMatrix& daily_regressors,
                           std::span<const std::string> names) {
    if (score_dates.size() != scores.size()) {
        throw Error(ErrorCode::dimension, "align_weekly: score dates and values differ in length");
    }
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        const auto j = daily_regressors.column_index(name);
        if (!j) throw Error(ErrorCode::schema, "regressor column '" + name + "' not found");
        cols.push_back(*j);
    }
    std::map<Date, std::size_t> feature_row;
    for (std::size_t i = 0; i < daily_regressors.rows(); ++i) {
        feature_row.emplace(daily_regressors.dates[i], i);
    }

    std::vector<Date> dates;
    std::vector<double> y;
    std::vector<std::vector<double>> x(cols.size());
    for (std::size_t i = 0; i < score_dates.size(); ++i) {
        std::size_t row = 0;
        if (!cols.empty()) {
            const auto it = feature_row.find(score_dates[i]);
            if (it == feature_row.end()) continue;
            row = it->second;
        }
        dates.push_back(score_dates[i]);
        y.push_back(scores[i]);
        for (std::size_t j = 0; j < cols.size(); ++j) x[j].push_back(daily_regressors.at(row, cols[j]));
    }

    WeeklyDataset out;
    for (const auto& p : weekly_resample(dates, y)) {
        out.y.weeks.push_back(p.week_start);
        out.y.values.push_back(p.value);
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
        Regressor r{names[j], {}};
        for (const auto& p : weekly_resample(dates, x[j])) r.values.push_back(p.value);
        out.regressors.push_back(std::move(r));
    }
    return out;
}

std::string forecast_csv(const ForecastResult& result) {
    std::string out = "week_start,yhat,lower,upper,trend,seasonal,regressors\n";
    for (const auto& p : result.points) {
        out += p.week_start.iso();
        for (double v : {p.yhat, p.lower, p.upper, p.trend, p.seasonal, p.regressors}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string forecast_json(const ForecastResult& result) {
    nlohmann::ordered_json j;
    j["interval_level"] = result.interval_level;
    auto points = nlohmann::ordered_json::array();
    for (const auto& p : result.points) {
        points.push_back({{"week_start", p.week_start.iso()},
                          {"yhat", p.yhat},
                          {"lower", p.lower},
                          {"upper", p.upper},
                          {"trend", p.trend},
                          {"seasonal", p.seasonal},
                          {"regressors", p.regressors}});
    }
    j["points"] = points;
    return j.dump();
}

namespace {

constexpr const char* kForecastFormat = "mpirisk.forecast";
constexpr int kForecastVersion = 1;

std::vector<std::string> iso_dates(std::span<const Date> dates) {
    std::vector<std::string> out;
    for (Date d : dates) out.push_back(d.iso());
    return out;
}

}  // namespace

std::string forecast_model_to_json(const ForecastModel& m) {
    nlohmann::ordered_json j;
    j["format"] = kForecastFormat;
    j["version"] = kForecastVersion;
    const auto& c = m.config;
    j["config"] = {{"n_changepoints", c.n_changepoints},
                   {"changepoint_range", c.changepoint_range},
                   {"yearly_order", c.yearly_order},
                   {"period_weeks", c.period_weeks},
                   {"trend_l2", c.trend_l2},
                   {"regressor_l2", c.regressor_l2},
                   {"seasonality_l2", c.seasonality_l2},
                   {"interval_level", c.interval_level}};
    j["origin"] = m.origin.iso();
    j["step_days"] = 7;
    j["intercept"] = m.intercept;
    j["slope"] = m.slope;
    j["changepoints"] = m.changepoints;
    j["deltas"] = m.deltas;
    j["fourier"] = m.fourier;
    j["regressor_names"] = m.regressor_names;
    j["regressor_mean"] = m.regressor_mean;
    j["regressor_scale"] = m.regressor_scale;
    j["beta"] = m.beta;
    j["residual_sigma"] = m.residual_sigma;
    j["history"] = {{"weeks", iso_dates(m.history.weeks)}, {"values", m.history.values}};
    auto regs = nlohmann::ordered_json::array();
    for (const auto& r : m.history_regressors) regs.push_back({{"name", r.name}, {"values", r.values}});
    j["history_regressors"] = regs;
    j["fitted"] = m.fitted;
    return j.dump() + "\n";
}

ForecastModel forecast_model_from_json(std::string_view text) {
    using nlohmann::json;
    try {
        const auto j = json::parse(text);
        if (j.at("format") != kForecastFormat) throw Error(ErrorCode::schema, "not a forecast model file");
        if (j.at("version").get<int>() != kForecastVersion) {
            throw Error(ErrorCode::schema, "unsupported forecast model version");
        }
        ForecastModel m;
        const auto& c = j.at("config");
        m.config.n_changepoints = c.at("n_changepoints").get<int>();
        m.config.changepoint_range = c.at("changepoint_range").get<double>();
        m.config.yearly_order = c.at("yearly_order").get<int>();
        m.config.period_weeks = c.at("period_weeks").get<double>();
        m.config.trend_l2 = c.at("trend_l2").get<double>();
        m.config.regressor_l2 = c.at("regressor_l2").get<double>();
        m.config.seasonality_l2 = c.at("seasonality_l2").get<double>();
        m.config.interval_level = c.at("interval_level").get<double>();
        m.config.check();
        m.origin = Date::parse_iso(j.at("origin").get<std::string>());
        m.intercept = j.at("intercept").get<double>();
        m.slope = j.at("slope").get<double>();
        m.changepoints = j.at("changepoints").get<std::vector<double>>();
        m.deltas = j.at("deltas").get<std::vector<double>>();
        m.fourier = j.at("fourier").get<std::vector<double>>();
        m.regressor_names = j.at("regressor_names").get<std::vector<std::string>>();
        m.regressor_mean = j.at("regressor_mean").get<std::vector<double>>();
        m.regressor_scale = j.at("regressor_scale").get<std::vector<double>>();
        m.beta = j.at("beta").get<std::vector<double>>();
        m.residual_sigma = j.at("residual_sigma").get<double>();
        for (const auto& w : j.at("history").at("weeks")) {
            m.history.weeks.push_back(Date::parse_iso(w.get<std::string>()));
        }
        m.history.values = j.at("history").at("values").get<std::vector<double>>();
        for (const auto& r : j.at("history_regressors")) {
            m.history_regressors.push_back(
                {r.at("name").get<std::string>(), r.at("values").get<std::vector<double>>()});
        }
        m.fitted = j.at("fitted").get<std::vector<double>>();
        const auto nreg = m.regressor_names.size();
        if (m.deltas.size() != m.changepoints.size() || m.regressor_mean.size() != nreg ||
            m.regressor_scale.size() != nreg || m.beta.size() != nreg ||
            m.history_regressors.size() != nreg || m.history.weeks.empty() ||
            m.history.weeks.size() != m.history.values.size()) {
            throw Error(ErrorCode::schema, "forecast model arrays are inconsistent");
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, std::string("forecast model JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------- decomposition

Decomposition decompose(std::span<const double> values, int period) {
    if (period < 2) throw Error(ErrorCode::precondition, "decompose: period must be >= 2");
    const auto p = static_cast<std::size_t>(period);
    const std::size_t n = values.size();
    if (n < 2 * p) {
        throw Error(ErrorCode::precondition, "decompose: series shorter than two periods");
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    Decomposition d;
    d.trend.assign(n, nan);
    d.residual.assign(n, nan);
    d.seasonal.assign(n, 0.0);

    const std::size_t half = p / 2;
    d.first = half;
    d.last = n - 1 - half;
    for (std::size_t i = d.first; i <= d.last; ++i) {
        double sum = 0.0;
        if (p % 2 == 0) {
            sum = 0.5 * values[i - half] + 0.5 * values[i + half];
            for (std::size_t k = i - half + 1; k < i + half; ++k) sum += values[k];
        } else {
            for (std::size_t k = i - half; k <= i + half; ++k) sum += values[k];
        }
        d.trend[i] = sum / static_cast<double>(p);
    }

    std::vector<double> pos_sum(p, 0.0);
    std::vector<std::size_t> pos_count(p, 0);
    for (std::size_t i = d.first; i <= d.last; ++i) {
        pos_sum[i % p] += values[i] - d.trend[i];
        ++pos_count[i % p];
    }
    std::vector<double> pattern(p);
    double mean = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
        pattern[k] = pos_sum[k] / static_cast<double>(pos_count[k]);
        mean += pattern[k];
    }
    mean /= static_cast<double>(p);
    for (double& s : pattern) s -= mean;

    for (std::size_t i = 0; i < n; ++i) d.seasonal[i] = pattern[i % p];
    for (std::size_t i = d.first; i <= d.last; ++i) {
        d.residual[i] = values[i] - (d.trend[i] + d.seasonal[i]);
    }
    return d;
}

}  // namespace mpirisk
