#include "mpirisk/features.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/text.hpp"

#include <algorithm>
#include <cmath>

namespace mpirisk {

std::string_view variable_name(Variable v) {
    switch (v) {
        case Variable::aod: return "aod";
        case Variable::temperature: return "temperature";
        case Variable::humidity: return "humidity";
        case Variable::wind_speed: return "wind_speed";
        case Variable::solar_irradiance: return "solar_irradiance";
    }
    return "unknown";
}

std::optional<Variable> parse_variable(std::string_view name) {
    for (Variable v : kAllVariables) {
        if (variable_name(v) == name) return v;
    }
    return std::nullopt;
}

double value_of(const EnvRecord& r, Variable v) {
    switch (v) {
        case Variable::aod: return r.aod;
        case Variable::temperature: return r.temperature;
        case Variable::humidity: return r.humidity;
        case Variable::wind_speed: return r.wind_speed;
        case Variable::solar_irradiance: return r.solar_irradiance;
    }
    return kMissing;
}

MinMax minmax_fit(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::precondition, "minmax_fit: empty input");
    MinMax r{values[0], values[0]};
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::precondition, "minmax_fit: non-finite value");
        r.min = std::min(r.min, v);
        r.max = std::max(r.max, v);
    }
    return r;
}

double minmax_apply(const MinMax& range, double x) {
    const double span = range.max - range.min;
    if (span == 0.0) return 0.0;
    return (x - range.min) / span;
}

std::vector<double> rolling_stat(std::span<const double> values, int window, RollingStat stat) {
    if (window < 2) throw Error(ErrorCode::precondition, "rolling_stat: window must be >= 2");
    const auto w = static_cast<std::size_t>(window);
    std::vector<double> out;
    if (values.size() < w) return out;
    out.reserve(values.size() - w + 1);
    for (std::size_t end = w; end <= values.size(); ++end) {
        const auto win = values.subspan(end - w, w);
        double mean = 0.0;
        for (double v : win) mean += v;
        mean /= static_cast<double>(w);
        if (stat == RollingStat::mean) {
            out.push_back(mean);
            continue;
        }
        double ss = 0.0;
        for (double v : win) ss += (v - mean) * (v - mean);
        out.push_back(std::sqrt(ss / static_cast<double>(w - 1)));
    }
    return out;
}

// ---------------------------------------------------------------- spec

FeatureSpec FeatureSpec::defaults() {
    FeatureSpec s;
    s.immediate = {Variable::aod, Variable::solar_irradiance, Variable::temperature,
                   Variable::humidity, Variable::wind_speed};
    for (auto stat : {RollingStat::mean, RollingStat::std}) {
        for (auto var : {Variable::aod, Variable::solar_irradiance}) {
            for (int w : {3, 7}) s.rolling.push_back({var, w, stat});
        }
    }
    s.include_month = true;
    return s;
}

void FeatureSpec::check() const {
    for (const auto& r : rolling) {
        if (r.window < 2) throw Error(ErrorCode::precondition, "feature spec: window must be >= 2");
    }
    for (const auto& l : lags) {
        if (l.lag < 1) throw Error(ErrorCode::precondition, "feature spec: lag must be >= 1");
    }
    for (Variable d : directional) {
        if (std::find(immediate.begin(), immediate.end(), d) == immediate.end()) {
            throw Error(ErrorCode::precondition, "feature spec: directional variable '" +
                                                     std::string(variable_name(d)) +
                                                     "' is not an immediate column");
        }
    }
    auto names = column_names();
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw Error(ErrorCode::precondition, "feature spec: duplicate column");
    }
}

std::vector<std::string> FeatureSpec::column_names() const {
    std::vector<std::string> names;
    for (Variable v : immediate) names.emplace_back(variable_name(v));
    for (const auto& r : rolling) {
        names.push_back(std::string(variable_name(r.variable)) + "_rolling_" +
                        std::to_string(r.window) + "d_" +
                        (r.stat == RollingStat::mean ? "mean" : "std"));
    }
    for (const auto& l : lags) {
        names.push_back(std::string(variable_name(l.variable)) + "_lag_" + std::to_string(l.lag));
    }
    if (include_month) names.emplace_back("month");
    return names;
}

int FeatureSpec::lookback() const {
    int k = 0;
    for (const auto& r : rolling) k = std::max(k, r.window - 1);
    for (const auto& l : lags) k = std::max(k, l.lag);
    return k;
}

// ---------------------------------------------------------------- matrix

std::vector<double> FeatureMatrix::column(std::size_t j) const {
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, j);
    return out;
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        if (feature_names[j] == name) return j;
    }
    return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix out;
    out.feature_names = feature_names;
    out.dates.reserve(indices.size());
    out.values.reserve(indices.size() * cols());
    for (std::size_t i : indices) {
        out.dates.push_back(dates.at(i));
        const auto r = row(i);
        out.values.insert(out.values.end(), r.begin(), r.end());
    }
    return out;
}

FeatureMatrix raw_feature_matrix(const EnvSeries& series, const FeatureSpec& spec) {
    spec.check();
    require_valid(series, "build_feature_matrix");
    const auto& recs = series.records;
    const auto lookback = static_cast<std::size_t>(spec.lookback());

    FeatureMatrix m;
    m.feature_names = spec.column_names();

    // Per-variable columns once, so rolling windows can reuse rolling_stat.
    std::vector<std::vector<double>> base(std::size(kAllVariables));
    for (Variable v : kAllVariables) {
        auto& col = base[static_cast<std::size_t>(v)];
        col.reserve(recs.size());
        for (const auto& r : recs) col.push_back(value_of(r, v));
    }

    for (std::size_t i = lookback; i < recs.size(); ++i) {
        // Dates strictly increase, so this holds iff the window has no gap.
        if (recs[i - lookback].date != recs[i].date - static_cast<std::int32_t>(lookback)) continue;

        std::vector<double> row;
        row.reserve(m.cols());
        for (Variable v : spec.immediate) row.push_back(base[static_cast<std::size_t>(v)][i]);
        for (const auto& rf : spec.rolling) {
            const auto& col = base[static_cast<std::size_t>(rf.variable)];
            const auto w = static_cast<std::size_t>(rf.window);
            const auto stat =
                rolling_stat(std::span<const double>(col).subspan(i + 1 - w, w), rf.window, rf.stat);
            row.push_back(stat.front());
        }
        for (const auto& lf : spec.lags) {
            row.push_back(base[static_cast<std::size_t>(lf.variable)][i - static_cast<std::size_t>(lf.lag)]);
        }
        if (spec.include_month) row.push_back(static_cast<double>(recs[i].date.month()));

        if (std::any_of(row.begin(), row.end(), [](double x) { return !std::isfinite(x); })) {
            continue;
        }
        m.dates.push_back(recs[i].date);
        m.values.insert(m.values.end(), row.begin(), row.end());
    }
    return m;
}

ScalerParams fit_scaler(const FeatureMatrix& raw, std::optional<Date> train_end) {
    ScalerParams p;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        if (!train_end || raw.dates[i] <= *train_end) rows.push_back(i);
    }
    for (std::size_t j = 0; j < raw.cols(); ++j) {
        if (raw.feature_names[j] == "month") continue;
        std::vector<double> col;
        col.reserve(rows.size());
        for (std::size_t i : rows) col.push_back(raw.at(i, j));
        p.names.push_back(raw.feature_names[j]);
        p.ranges.push_back(minmax_fit(col));
    }
    return p;
}

FeatureMatrix build_feature_matrix(const EnvSeries& series, const FeatureSpec& spec,
                                   const ScalerParams& params) {
    FeatureMatrix m = raw_feature_matrix(series, spec);
    std::vector<bool> directional(m.cols(), false);
    for (Variable v : spec.directional) {
        directional[*m.column_index(variable_name(v))] = true;
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const auto& name = m.feature_names[j];
        if (name == "month") {
            for (std::size_t i = 0; i < m.rows(); ++i) m.at(i, j) = (m.at(i, j) - 1.0) / 11.0;
            continue;
        }
        const auto it = std::find(params.names.begin(), params.names.end(), name);
        if (it == params.names.end()) {
            throw Error(ErrorCode::dimension, "scaler has no range for feature '" + name + "'");
        }
        const MinMax range = params.ranges[static_cast<std::size_t>(it - params.names.begin())];
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const double s = minmax_apply(range, m.at(i, j));
            m.at(i, j) = directional[j] ? 1.0 - s : s;
        }
    }
    return m;
}

std::string feature_matrix_csv(const FeatureMatrix& m) {
    std::string out = "date";
    for (const auto& n : m.feature_names) out += "," + n;
    out += '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += m.dates[i].iso();
        for (double v : m.row(i)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

FeatureMatrix parse_feature_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw Error(ErrorCode::schema, "feature CSV is empty");
    const auto header = split(lines[0], ',');
    if (header.empty() || header[0] != "date") {
        throw Error(ErrorCode::schema, "feature CSV must start with a 'date' column");
    }
    FeatureMatrix m;
    for (std::size_t j = 1; j < header.size(); ++j) m.feature_names.emplace_back(header[j]);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != header.size()) {
            throw ParseError(ErrorCode::row, i + 1, "wrong number of cells");
        }
        try {
            m.dates.push_back(Date::parse_iso(cells[0]));
        } catch (const Error& e) {
            throw ParseError(ErrorCode::row, i + 1, e.what());
        }
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double v = 0.0;
            if (!parse_double(cells[j], v)) {
                throw ParseError(ErrorCode::row, i + 1, "cannot parse '" + std::string(cells[j]) + "'");
            }
            m.values.push_back(v);
        }
    }
    return m;
}

}  // namespace mpirisk
