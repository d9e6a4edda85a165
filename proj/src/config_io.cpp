#include "mpirisk/config_io.hpp"

#include "mpirisk/error.hpp"

#include <cmath>
#include <set>

namespace mpirisk {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, std::string_view what) {
    if (!j.is_object()) throw Error(ErrorCode::schema, std::string(what) + " must be a JSON object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw Error(ErrorCode::schema, std::string(what) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

Variable variable_from(const json& j) {
    const auto v = parse_variable(j.get<std::string>());
    if (!v) throw Error(ErrorCode::schema, "unknown variable '" + j.get<std::string>() + "'");
    return *v;
}

template <typename F>
auto guarded(std::string_view what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, std::string(what) + ": " + e.what());
    }
}

}  // namespace

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema, std::string(what) + " is not valid JSON: " + e.what());
    }
}

Json mpi_config_to_json(const MpiConfig& c) {
    Json t = {{"aod", c.thresholds.aod},
              {"temperature", c.thresholds.temperature},
              {"humidity", c.thresholds.humidity},
              {"wind_speed", c.thresholds.wind_speed},
              {"irr_var_percentile", c.thresholds.irr_var_percentile}};
    if (c.thresholds.irr_var_absolute) t["irr_var_absolute"] = *c.thresholds.irr_var_absolute;
    return {{"thresholds", t},
            {"weights",
             {{"aod", c.weights[0]},
              {"temperature", c.weights[1]},
              {"humidity", c.weights[2]},
              {"wind_speed", c.weights[3]},
              {"irr_var", c.weights[4]}}},
            {"band_edges", {{"low_upper", c.band_edges.low_upper}, {"high_lower", c.band_edges.high_lower}}},
            {"band_mode", c.band_mode == BandMode::fixed ? "fixed" : "percentile"}};
}

MpiConfig mpi_config_from_json(const json& j, MpiConfig c) {
    return guarded("MPI config", [&] {
        reject_unknown(j, {"thresholds", "weights", "band_edges", "band_mode"}, "MPI config");
        if (auto t = j.find("thresholds"); t != j.end()) {
            reject_unknown(*t, {"aod", "temperature", "humidity", "wind_speed", "irr_var_percentile",
                                "irr_var_absolute"},
                           "thresholds");
            read(*t, "aod", c.thresholds.aod);
            read(*t, "temperature", c.thresholds.temperature);
            read(*t, "humidity", c.thresholds.humidity);
            read(*t, "wind_speed", c.thresholds.wind_speed);
            read(*t, "irr_var_percentile", c.thresholds.irr_var_percentile);
            if (auto a = t->find("irr_var_absolute"); a != t->end()) {
                if (a->is_null()) {
                    c.thresholds.irr_var_absolute.reset();
                } else {
                    c.thresholds.irr_var_absolute = a->get<double>();
                }
            }
        }
        if (auto w = j.find("weights"); w != j.end()) {
            if (w->is_array()) {
                const auto v = w->get<std::vector<double>>();
                if (v.size() != kConditionCount) throw Error(ErrorCode::schema, "weights: need 5 values");
                std::copy(v.begin(), v.end(), c.weights.begin());
            } else {
                reject_unknown(*w, {"aod", "temperature", "humidity", "wind_speed", "irr_var"}, "weights");
                read(*w, "aod", c.weights[0]);
                read(*w, "temperature", c.weights[1]);
                read(*w, "humidity", c.weights[2]);
                read(*w, "wind_speed", c.weights[3]);
                read(*w, "irr_var", c.weights[4]);
            }
        }
        if (auto b = j.find("band_edges"); b != j.end()) {
            reject_unknown(*b, {"low_upper", "high_lower"}, "band_edges");
            read(*b, "low_upper", c.band_edges.low_upper);
            read(*b, "high_lower", c.band_edges.high_lower);
        }
        if (auto m = j.find("band_mode"); m != j.end()) {
            const auto s = m->get<std::string>();
            if (s == "fixed") {
                c.band_mode = BandMode::fixed;
            } else if (s == "percentile") {
                c.band_mode = BandMode::percentile;
            } else {
                throw Error(ErrorCode::schema, "band_mode must be 'fixed' or 'percentile'");
            }
        }
        return c;
    });
}

Json feature_spec_to_json(const FeatureSpec& s) {
    Json immediate = Json::array(), rolling = Json::array(), lags = Json::array(),
         directional = Json::array();
    for (Variable v : s.immediate) immediate.push_back(variable_name(v));
    for (const auto& r : s.rolling) {
        rolling.push_back({{"variable", variable_name(r.variable)},
                           {"window", r.window},
                           {"stat", r.stat == RollingStat::mean ? "mean" : "std"}});
    }
    for (const auto& l : s.lags) lags.push_back({{"variable", variable_name(l.variable)}, {"lag", l.lag}});
    for (Variable v : s.directional) directional.push_back(variable_name(v));
    return {{"immediate", immediate},
            {"rolling", rolling},
            {"lags", lags},
            {"directional", directional},
            {"include_month", s.include_month}};
}

FeatureSpec feature_spec_from_json(const json& j) {
    return guarded("feature spec", [&] {
        reject_unknown(j, {"immediate", "rolling", "lags", "directional", "include_month"}, "feature spec");
        FeatureSpec s = FeatureSpec::defaults();
        if (auto it = j.find("immediate"); it != j.end()) {
            s.immediate.clear();
            for (const auto& v : *it) s.immediate.push_back(variable_from(v));
        }
        if (auto it = j.find("rolling"); it != j.end()) {
            s.rolling.clear();
            for (const auto& r : *it) {
                const auto stat = r.at("stat").get<std::string>();
                if (stat != "mean" && stat != "std") throw Error(ErrorCode::schema, "stat must be mean or std");
                s.rolling.push_back({variable_from(r.at("variable")), r.at("window").get<int>(),
                                     stat == "mean" ? RollingStat::mean : RollingStat::std});
            }
        }
        if (auto it = j.find("lags"); it != j.end()) {
            s.lags.clear();
            for (const auto& l : *it) s.lags.push_back({variable_from(l.at("variable")), l.at("lag").get<int>()});
        }
        if (auto it = j.find("directional"); it != j.end()) {
            s.directional.clear();
            for (const auto& v : *it) s.directional.push_back(variable_from(v));
        }
        read(j, "include_month", s.include_month);
        s.check();
        return s;
    });
}

Json scaler_to_json(const ScalerParams& p) {
    Json cols = Json::array();
    for (std::size_t i = 0; i < p.names.size(); ++i) {
        cols.push_back({{"name", p.names[i]}, {"min", p.ranges[i].min}, {"max", p.ranges[i].max}});
    }
    return {{"format", "mpirisk.scaler"}, {"version", 1}, {"columns", cols}};
}

ScalerParams scaler_from_json(const json& j) {
    return guarded("scaler", [&] {
        ScalerParams p;
        for (const auto& c : j.at("columns")) {
            p.names.push_back(c.at("name").get<std::string>());
            MinMax r{c.at("min").get<double>(), c.at("max").get<double>()};
            if (!(r.max >= r.min)) throw Error(ErrorCode::schema, "scaler: max < min for " + p.names.back());
            p.ranges.push_back(r);
        }
        return p;
    });
}

Json train_params_to_json(const TrainParams& p) {
    return {{"n_rounds", p.n_rounds},
            {"max_depth", p.max_depth},
            {"learning_rate", p.learning_rate},
            {"l2_leaf_reg", p.l2_leaf_reg},
            {"min_child_weight", p.min_child_weight},
            {"feature_subsample", p.feature_subsample},
            {"seed", p.seed},
            {"n_classes", p.n_classes}};
}

TrainParams train_params_from_json(const json& j, TrainParams p) {
    return guarded("train params", [&] {
        reject_unknown(j, {"n_rounds", "max_depth", "learning_rate", "l2_leaf_reg", "min_child_weight",
                           "feature_subsample", "seed", "n_classes", "test_fraction", "split_seed"},
                       "train params");
        read(j, "n_rounds", p.n_rounds);
        read(j, "max_depth", p.max_depth);
        read(j, "learning_rate", p.learning_rate);
        read(j, "l2_leaf_reg", p.l2_leaf_reg);
        read(j, "min_child_weight", p.min_child_weight);
        read(j, "feature_subsample", p.feature_subsample);
        read(j, "seed", p.seed);
        read(j, "n_classes", p.n_classes);
        p.check();
        return p;
    });
}

Json forecast_config_to_json(const ForecastConfig& c) {
    return {{"n_changepoints", c.n_changepoints},
            {"changepoint_range", c.changepoint_range},
            {"yearly_order", c.yearly_order},
            {"period_weeks", c.period_weeks},
            {"trend_l2", c.trend_l2},
            {"regressor_l2", c.regressor_l2},
            {"seasonality_l2", c.seasonality_l2},
            {"interval_level", c.interval_level}};
}

ForecastConfig forecast_config_from_json(const json& j, ForecastConfig c) {
    return guarded("forecast config", [&] {
        reject_unknown(j, {"n_changepoints", "changepoint_range", "yearly_order", "period_weeks", "trend_l2",
                           "regressor_l2", "seasonality_l2", "interval_level", "regressors", "shap", "top_k"},
                       "forecast config");
        read(j, "n_changepoints", c.n_changepoints);
        read(j, "changepoint_range", c.changepoint_range);
        read(j, "yearly_order", c.yearly_order);
        read(j, "period_weeks", c.period_weeks);
        read(j, "trend_l2", c.trend_l2);
        read(j, "regressor_l2", c.regressor_l2);
        read(j, "seasonality_l2", c.seasonality_l2);
        read(j, "interval_level", c.interval_level);
        c.check();
        return c;
    });
}

Json env_record_to_json(const EnvRecord& r) {
    auto num = [](double v) { return std::isnan(v) ? Json(nullptr) : Json(v); };
    return {{"date", r.date.iso()},
            {"aod", num(r.aod)},
            {"temperature", num(r.temperature)},
            {"humidity", num(r.humidity)},
            {"wind_speed", num(r.wind_speed)},
            {"solar_irradiance", num(r.solar_irradiance)}};
}

EnvRecord env_record_from_json(const json& j) {
    return guarded("record", [&] {
        if (!j.is_object()) throw Error(ErrorCode::schema, "record must be a JSON object");
        EnvRecord r;
        r.date = Date::parse_iso(j.at("date").get<std::string>());
        auto num = [&](const char* key) {
            const auto& v = j.at(key);
            return v.is_null() ? kMissing : v.get<double>();
        };
        r.aod = num("aod");
        r.temperature = num("temperature");
        r.humidity = num("humidity");
        r.wind_speed = num("wind_speed");
        r.solar_irradiance = num("solar_irradiance");
        return r;
    });
}

Json score_to_json(const MpiScore& s) {
    Json triggers;
    for (std::size_t c = 0; c < kConditionCount; ++c) {
        triggers[std::string(condition_name(static_cast<Condition>(c)))] = {
            {"fired", s.triggers.fired[c]}, {"value", s.triggers.values[c]}};
    }
    return {{"date", s.date.iso()}, {"mpi", s.score}, {"label", label_name(s.label)}, {"triggers", triggers}};
}

std::string scores_json(std::span<const MpiScore> scores) {
    Json arr = Json::array();
    for (const auto& s : scores) arr.push_back(score_to_json(s));
    return arr.dump();
}

Json importance_to_json(const GlobalImportance& g) {
    Json arr = Json::array();
    for (std::size_t rank = 0; rank < g.order.size(); ++rank) {
        const auto j = g.order[rank];
        arr.push_back({{"rank", rank + 1}, {"name", g.feature_names[j]}, {"mean_abs_phi", g.mean_abs[j]}});
    }
    return arr;
}

GlobalImportance importance_from_json(const nlohmann::json& ranked) {
    try {
        GlobalImportance g;
        for (const auto& e : ranked) {
            g.order.push_back(g.feature_names.size());
            g.feature_names.push_back(e.at("name").get<std::string>());
            g.mean_abs.push_back(e.at("mean_abs_phi").get<double>());
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema, std::string("importance ranking: ") + e.what());
    }
}

}  // namespace mpirisk
