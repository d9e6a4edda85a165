#include "mpirisk/service.hpp"

#include "mpirisk/config_io.hpp"
#include "mpirisk/error.hpp"
#include "mpirisk/log.hpp"
#include "mpirisk/text.hpp"

#include <httplib.h>

#include <cmath>
#include <filesystem>

namespace mpirisk {

namespace {

using nlohmann::json;

HttpResponse error_response(int status, std::string_view code, std::string_view message,
                            const Json& detail = Json::object()) {
    Json j{{"code", code}, {"message", message}, {"detail", detail}};
    return {status, j.dump()};
}

HttpResponse ok(const std::string& body) { return {200, body}; }

std::string resolve(const std::string& base_dir, const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (std::filesystem::path(base_dir) / path).string();
}

std::optional<json> parse_body(std::string_view body, HttpResponse& err) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        err = error_response(400, "malformed_json", "request body is not valid JSON", e.what());
        return std::nullopt;
    }
}

HttpResponse from_error(const Error& e) {
    switch (e.code()) {
        case ErrorCode::validation: return error_response(422, "validation_failed", e.what());
        case ErrorCode::dimension: return error_response(422, "dimension_mismatch", e.what());
        case ErrorCode::degenerate: return error_response(422, "degenerate", e.what());
        case ErrorCode::schema:
        case ErrorCode::row:
        case ErrorCode::duplicate:
        case ErrorCode::precondition: return error_response(422, "invalid_request", e.what());
        default: return error_response(500, "internal", e.what());
    }
}

template <typename F>
HttpResponse guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return from_error(e);
    } catch (const json::exception& e) {
        return error_response(422, "invalid_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

std::vector<EnvRecord> records_from(const json& body, std::vector<std::optional<double>>& irr_given) {
    const json& arr = body.is_object() ? body.at("records") : body;
    if (!arr.is_array()) throw Error(ErrorCode::schema, "expected an array of records");
    std::vector<EnvRecord> out;
    for (const auto& item : arr) {
        json rec = item;
        std::optional<double> irr;
        if (rec.is_object() && rec.contains("irr_var")) {
            if (!rec["irr_var"].is_null()) irr = rec["irr_var"].get<double>();
            rec.erase("irr_var");
        }
        out.push_back(env_record_from_json(rec));
        irr_given.push_back(irr);
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out[i - 1].date < out[i].date)) {
            throw Error(ErrorCode::precondition, "records must be strictly increasing by date");
        }
    }
    return out;
}

}  // namespace

ServiceConfig service_config_from_json(std::string_view text, const std::string& base_dir) {
    const auto j = parse_json(text, "service config");
    try {
        ServiceConfig c;
        if (auto it = j.find("host"); it != j.end()) c.host = it->get<std::string>();
        if (auto it = j.find("port"); it != j.end()) c.port = it->get<int>();
        if (auto it = j.find("body_limit"); it != j.end()) c.body_limit = it->get<std::size_t>();
        if (auto it = j.find("cache_capacity"); it != j.end()) c.cache_capacity = it->get<std::size_t>();
        c.classifier = resolve(base_dir, j.at("classifier").get<std::string>());
        c.forecaster = resolve(base_dir, j.at("forecaster").get<std::string>());
        c.mpi_config = resolve(base_dir, j.at("mpi_config").get<std::string>());
        c.scaler = resolve(base_dir, j.at("scaler").get<std::string>());
        c.history = resolve(base_dir, j.at("history").get<std::string>());
        if (auto it = j.find("feature_spec"); it != j.end()) {
            c.feature_spec = resolve(base_dir, it->get<std::string>());
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, std::string("service config: ") + e.what());
    }
}

ServiceArtifacts load_artifacts(const ServiceConfig& config) {
    ServiceArtifacts a;
    a.classifier = model_from_json(read_file(config.classifier));
    a.forecaster = forecast_model_from_json(read_file(config.forecaster));
    a.mpi = mpi_config_from_json(parse_json(read_file(config.mpi_config), config.mpi_config));
    a.scaler = scaler_from_json(parse_json(read_file(config.scaler), config.scaler));
    if (!config.feature_spec.empty()) {
        a.feature_spec = feature_spec_from_json(parse_json(read_file(config.feature_spec), config.feature_spec));
    }
    a.history = parse_env_csv(read_file(config.history));
    return a;
}

Service::Service(ServiceArtifacts artifacts, std::size_t cache_capacity)
    : artifacts_(std::move(artifacts)), cache_capacity_(std::max<std::size_t>(1, cache_capacity)) {
    artifacts_.mpi.check();
    artifacts_.classifier.check();
    require_valid(artifacts_.history, "service");

    const auto names = artifacts_.feature_spec.column_names();
    if (names != artifacts_.classifier.feature_names) {
        throw Error(ErrorCode::dimension, "classifier feature names differ from the feature spec");
    }
    for (const auto& r : artifacts_.forecaster.regressor_names) {
        if (std::find(names.begin(), names.end(), r) == names.end()) {
            throw Error(ErrorCode::dimension, "forecaster regressor '" + r + "' is not a feature column");
        }
    }

    thresholds_ = resolve_thresholds(artifacts_.mpi, irr_variability(artifacts_.history));
    const auto features = build_feature_matrix(artifacts_.history, artifacts_.feature_spec, artifacts_.scaler);
    const auto g = global_importance(artifacts_.classifier, features);
    global_json_ = Json{{"features", importance_to_json(g)}, {"samples", features.rows()}}.dump();
}

HttpResponse Service::health() const { return ok(R"({"status":"ok"})"); }

HttpResponse Service::score(std::string_view body) const {
    HttpResponse err;
    const auto doc = parse_body(body, err);
    if (!doc) return err;
    return guarded([&] {
        std::vector<std::optional<double>> given;
        const auto records = records_from(*doc, given);
        EnvSeries series{records, {}};
        require_valid(series, "score");

        std::vector<EnvRecord> days;
        std::vector<double> irr;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (given[i]) {
                days.push_back(records[i]);
                irr.push_back(*given[i]);
                continue;
            }
            if (i < 2 || records[i - 2].date != records[i].date - 2) continue;
            const double window[] = {records[i - 2].solar_irradiance, records[i - 1].solar_irradiance,
                                     records[i].solar_irradiance};
            days.push_back(records[i]);
            irr.push_back(rolling_stat(window, 3, RollingStat::std).front());
        }
        const auto& cfg = artifacts_.mpi;
        return ok(scores_json(score_days(days, irr, thresholds_, cfg.weights, cfg.band_edges)));
    });
}

std::size_t Service::cache_size() const {
    std::lock_guard lock(cache_mu_);
    return cache_.size();
}

std::shared_ptr<const ForecastModel> Service::model_for(const std::string& key,
                                                        const MpiConfig& cfg) const {
    {
        std::lock_guard lock(cache_mu_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }

    // Re-score history and re-fit the additive model on the same weeks.
    const auto& base = artifacts_.forecaster;
    const auto scores = score_series(artifacts_.history, cfg);
    std::vector<Date> dates;
    std::vector<double> values;
    for (const auto& s : scores) {
        if (s.date < base.origin) continue;
        dates.push_back(s.date);
        values.push_back(s.score);
    }
    const auto weekly = weekly_resample(dates, values, base.origin);
    std::map<Date, double> by_week;
    for (const auto& p : weekly) by_week.emplace(p.week_start, p.value);
    std::vector<double> y;
    y.reserve(base.history.weeks.size());
    for (Date w : base.history.weeks) {
        const auto it = by_week.find(w);
        if (it == by_week.end()) {
            throw Error(ErrorCode::data, "re-scored history lacks week " + w.iso());
        }
        y.push_back(it->second);
    }
    auto model = std::make_shared<const ForecastModel>(refit(base, y));

    std::lock_guard lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    cache_.emplace(key, model);
    cache_order_.push_back(key);
    while (cache_.size() > cache_capacity_) {
        cache_.erase(cache_order_.front());
        cache_order_.pop_front();
    }
    return model;
}

HttpResponse Service::forecast(std::string_view body) const {
    HttpResponse err;
    const auto doc = parse_body(body, err);
    if (!doc) return err;
    if (!doc->is_object() || !doc->contains("horizon") || !(*doc)["horizon"].is_number_integer()) {
        return error_response(422, "invalid_horizon", "horizon must be an integer in [1, 520]");
    }
    const auto horizon = (*doc)["horizon"].get<long long>();
    if (horizon < 1 || horizon > kMaxHorizon) {
        return error_response(422, "invalid_horizon", "horizon must be an integer in [1, 520]",
                              Json{{"horizon", horizon}});
    }
    return guarded([&] {
        std::shared_ptr<const ForecastModel> model;
        std::vector<WeeklyPoint> history;
        const auto ov = doc->find("overrides");
        if (ov == doc->end() || ov->is_null() || ov->empty()) {
            model = std::shared_ptr<const ForecastModel>(&artifacts_.forecaster, [](const ForecastModel*) {});
        } else {
            const auto cfg = mpi_config_from_json(*ov, artifacts_.mpi);
            cfg.check();
            model = model_for(ov->dump(), cfg);
        }
        const auto result = predict(*model, static_cast<int>(horizon));
        Json hist = Json::array();
        for (std::size_t i = 0; i < model->history.weeks.size(); ++i) {
            hist.push_back({{"week_start", model->history.weeks[i].iso()},
                            {"value", model->history.values[i]},
                            {"fitted", model->fitted[i]}});
        }
        auto j = Json::parse(forecast_json(result));
        j["horizon"] = horizon;
        j["history"] = hist;
        return ok(j.dump());
    });
}

HttpResponse Service::explain_global() const { return ok(global_json_); }

HttpResponse Service::explain_sample(std::string_view body) const {
    HttpResponse err;
    const auto doc = parse_body(body, err);
    if (!doc) return err;
    return guarded([&] {
        if (!doc->is_object()) throw Error(ErrorCode::schema, "expected an object with 'features' or 'records'");
        const auto& model = artifacts_.classifier;
        std::vector<double> x;
        std::optional<Date> date;
        if (auto f = doc->find("features"); f != doc->end()) {
            x = f->get<std::vector<double>>();
            if (x.size() != model.n_features()) {
                throw Error(ErrorCode::dimension, "expected " + std::to_string(model.n_features()) +
                                                      " features, got " + std::to_string(x.size()));
            }
        } else if (doc->contains("records")) {
            std::vector<std::optional<double>> unused;
            EnvSeries series{records_from(*doc, unused), {}};
            const auto m = build_feature_matrix(series, artifacts_.feature_spec, artifacts_.scaler);
            if (m.rows() == 0) {
                throw Error(ErrorCode::precondition,
                            "records do not cover a complete feature window (need " +
                                std::to_string(artifacts_.feature_spec.lookback() + 1) + " consecutive days)");
            }
            const auto last = m.row(m.rows() - 1);
            x.assign(last.begin(), last.end());
            date = m.dates.back();
        } else {
            throw Error(ErrorCode::schema, "expected 'features' or 'records'");
        }

        const auto attr = tree_shap(model, x);
        std::size_t cls = static_cast<std::size_t>(predict_class(model, x));
        if (auto c = doc->find("class"); c != doc->end()) {
            const auto v = c->get<long long>();
            if (v < 0 || v >= model.n_classes) throw Error(ErrorCode::precondition, "class out of range");
            cls = static_cast<std::size_t>(v);
        }
        Json rows = Json::array();
        for (const auto& r : waterfall(attr, cls, model.feature_names)) {
            rows.push_back({{"feature", r.name}, {"contribution", r.contribution}, {"running_total", r.running_total}});
        }
        Json j;
        if (date) j["date"] = date->iso();
        j["class"] = cls;
        j["class_name"] = cls < 3 ? std::string(label_name(static_cast<RiskLabel>(cls))) : std::to_string(cls);
        j["base_value"] = attr.base_value[cls];
        j["margin"] = attr.margin[cls];
        j["probabilities"] = softmax(attr.margin);
        j["rows"] = rows;
        j["attribution"] = Json::parse(attribution_json(attr, model.feature_names));
        return ok(j.dump());
    });
}

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) const {
    if (path.starts_with("/v1/")) path.remove_prefix(3);
    if (method == "GET" && path == "/health") return health();
    if (method == "POST" && path == "/score") return score(body);
    if (method == "POST" && path == "/forecast") return forecast(body);
    if (method == "GET" && path == "/explain/global") return explain_global();
    if (method == "POST" && path == "/explain/sample") return explain_sample(body);
    return error_response(404, "not_found", "no such endpoint", Json{{"path", path}});
}

// ---------------------------------------------------------------- HTTP

HttpServer::HttpServer(const Service& service, std::size_t body_limit)
    : server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(body_limit);
    auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
        log::debug(req.method + " " + req.path + " -> " + std::to_string(r.status));
    };
    for (const char* prefix : {"", "/v1"}) {
        const std::string p(prefix);
        server_->Get(p + "/health", bridge);
        server_->Post(p + "/score", bridge);
        server_->Post(p + "/forecast", bridge);
        server_->Get(p + "/explain/global", bridge);
        server_->Post(p + "/explain/sample", bridge);
    }
    server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const auto r = res.status == 413
                           ? error_response(413, "payload_too_large", "request body exceeds the limit")
                           : error_response(res.status, res.status == 404 ? "not_found" : "http_error",
                                            "request failed", Json{{"path", req.path}});
        res.set_content(r.body, "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_) server_->stop();
}

}  // namespace mpirisk
