#include "mpirisk/cli.hpp"

#include "mpirisk/config_io.hpp"
#include "mpirisk/error.hpp"
#include "mpirisk/evaluate.hpp"
#include "mpirisk/explain.hpp"
#include "mpirisk/features.hpp"
#include "mpirisk/forecast.hpp"
#include "mpirisk/gbdt.hpp"
#include "mpirisk/ingest.hpp"
#include "mpirisk/log.hpp"
#include "mpirisk/mpi_index.hpp"
#include "mpirisk/service.hpp"
#include "mpirisk/synth.hpp"
#include "mpirisk/text.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace mpirisk::cli {

namespace {

// Plain comma-separated table with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    }
};

Table read_table(const std::string& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    Table t;
    if (lines.empty()) throw ParseError(ErrorCode::schema, 1, path + ": empty file");
    for (auto h : split(lines[0], ',')) t.header.emplace_back(h);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != t.header.size()) {
            throw ParseError(ErrorCode::row, static_cast<int>(i + 1),
                             path + ": expected " + std::to_string(t.header.size()) + " fields");
        }
        t.rows.emplace_back(cells.begin(), cells.end());
    }
    return t;
}

std::optional<std::size_t> first_column(const Table& t, std::initializer_list<std::string_view> names) {
    for (auto n : names) {
        if (auto c = t.column(n)) return c;
    }
    return std::nullopt;
}

int parse_class(const std::string& cell, int line) {
    if (auto l = parse_label(cell)) return static_cast<int>(*l);
    double v = 0.0;
    if (parse_double(cell, v) && v >= 0 && v == static_cast<int>(v)) return static_cast<int>(v);
    throw ParseError(ErrorCode::row, line, "unrecognized class label '" + cell + "'");
}

double parse_number(const std::string& cell, int line) {
    double v = 0.0;
    if (!parse_double(cell, v)) throw ParseError(ErrorCode::row, line, "not a number: '" + cell + "'");
    return v;
}

std::vector<std::string> class_names(int k) {
    std::vector<std::string> out;
    for (int c = 0; c < k; ++c) {
        out.push_back(k == 3 ? std::string(label_name(static_cast<RiskLabel>(c))) : std::to_string(c));
    }
    return out;
}

FeatureMatrix read_features(const std::string& path) { return parse_feature_csv(read_file(path)); }

EnvSeries read_env(const std::string& path) { return parse_env_csv(read_file(path)); }

void report_validation(const ValidationReport& r) {
    log::info("validation: " + std::to_string(r.row_count) + " rows, " + std::to_string(r.gap_dates.size()) +
              " gaps, " + std::to_string(r.missing.size()) + " missing, " + std::to_string(r.out_of_range.size()) +
              " out of range -> " + to_string(r.verdict));
    for (const auto& o : r.out_of_range) {
        log::error("  " + o.date.iso() + " " + o.field + " = " + format_double(o.value));
    }
}

std::string validation_json(const ValidationReport& r) {
    Json j;
    j["row_count"] = r.row_count;
    j["verdict"] = to_string(r.verdict);
    Json gaps = Json::array();
    for (auto d : r.gap_dates) gaps.push_back(d.iso());
    j["gap_dates"] = gaps;
    Json oor = Json::array();
    for (const auto& o : r.out_of_range) oor.push_back({{"date", o.date.iso()}, {"field", o.field}, {"value", o.value}});
    j["out_of_range"] = oor;
    Json miss = Json::array();
    for (const auto& m : r.missing) miss.push_back({{"date", m.date.iso()}, {"field", m.field}});
    j["missing"] = miss;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::uint64_t seed = 42;
    int days = 1826;
    std::string start = "2020-01-01";
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    ScenarioSpec spec;
    spec.seed = a.seed;
    spec.days = a.days;
    spec.start = Date::parse_iso(a.start);
    const auto series = generate(spec);
    write_file_atomic(a.out, serialize_env_csv(series));
    log::info("synth: wrote " + std::to_string(series.records.size()) + " days to " + a.out);
    return 0;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string input;
    std::string power;
    std::string power_url = std::string(kPowerBaseUrl);
    std::string out;
    std::string report;
    bool fill_gaps = false;
};

int cmd_ingest(const IngestArgs& a) {
    auto series = read_env(a.input);
    if (!a.power.empty()) {
        const auto parts = split(a.power, ',');
        double lat = 0.0, lon = 0.0;
        if (parts.size() != 4 || !parse_double(parts[0], lat) || !parse_double(parts[1], lon)) {
            throw Error(ErrorCode::precondition, "--power expects lat,lon,start,end");
        }
        PowerOptions opt;
        opt.base_url = a.power_url;
        const GeoPoint where{lat, lon};
        const auto start = Date::parse_iso(parts[2]);
        const auto end = Date::parse_iso(parts[3]);
        auto met = fetch_power(where, start, end, opt);
        if (a.fill_gaps) met = forward_fill(met);
        series = merge_aod(met, series);
        series.location = where;
    }
    if (a.fill_gaps) series = forward_fill(series);
    const auto report = validate(series);
    report_validation(report);
    if (!a.report.empty()) write_file_atomic(a.report, validation_json(report));
    if (report.verdict == Verdict::fail) {
        throw Error(ErrorCode::validation, "input failed validation; nothing written to " + a.out);
    }
    write_file_atomic(a.out, serialize_env_csv(series));
    return 0;
}

// ---------------------------------------------------------------- featurize

struct FeaturizeArgs {
    std::string input;
    std::string spec;
    std::string scaler;
    std::string scaler_out;
    std::string train_end;
    std::string out;
};

int cmd_featurize(const FeaturizeArgs& a) {
    const auto series = read_env(a.input);
    require_valid(series, "featurize");
    const auto spec = a.spec.empty() ? FeatureSpec::defaults()
                                     : feature_spec_from_json(parse_json(read_file(a.spec), a.spec));
    ScalerParams scaler;
    if (!a.scaler.empty()) {
        scaler = scaler_from_json(parse_json(read_file(a.scaler), a.scaler));
    } else {
        std::optional<Date> end;
        if (!a.train_end.empty()) end = Date::parse_iso(a.train_end);
        scaler = fit_scaler(raw_feature_matrix(series, spec), end);
    }
    const auto m = build_feature_matrix(series, spec, scaler);
    if (!a.scaler_out.empty()) write_file_atomic(a.scaler_out, scaler_to_json(scaler).dump(2) + "\n");
    write_file_atomic(a.out, feature_matrix_csv(m));
    log::info("featurize: " + std::to_string(m.rows()) + " rows x " + std::to_string(m.cols()) + " features");
    return 0;
}

// ---------------------------------------------------------------- index

struct IndexArgs {
    std::string input;
    std::string config;
    std::string config_out;
    bool derive_eof = false;
    std::string out;
};

int cmd_index(const IndexArgs& a) {
    const auto series = read_env(a.input);
    require_valid(series, "index");
    MpiConfig cfg;
    if (!a.config.empty()) cfg = mpi_config_from_json(parse_json(read_file(a.config), a.config));
    cfg.check();
    if (a.derive_eof) {
        cfg.weights = derive_eof_weights(series, cfg);
        std::string w;
        for (double x : cfg.weights) w += (w.empty() ? "" : " ") + format_double(x);
        log::info("index: EOF weights " + w);
    }
    cfg.thresholds.irr_var_absolute = resolve_thresholds(cfg, irr_variability(series)).irr_var;
    const auto scores = score_series(series, cfg);
    if (cfg.band_mode == BandMode::percentile) {
        std::vector<double> s;
        for (const auto& x : scores) s.push_back(x.score);
        cfg.band_edges = percentile_band_edges(s);
    }
    if (!a.config_out.empty()) write_file_atomic(a.config_out, mpi_config_to_json(cfg).dump(2) + "\n");
    write_file_atomic(a.out, scores_csv(scores));
    std::array<std::size_t, 3> counts{};
    for (const auto& x : scores) ++counts[static_cast<std::size_t>(x.label)];
    log::info("index: " + std::to_string(scores.size()) + " days; Low " + std::to_string(counts[0]) + ", Medium " +
              std::to_string(counts[1]) + ", High " + std::to_string(counts[2]));
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string features;
    std::string labels;
    std::string params;
    std::string holdout_out;
    std::string out;
};

int cmd_train(const TrainArgs& a) {
    const auto X = read_features(a.features);
    const auto scores = parse_scores_csv(read_file(a.labels));
    std::map<Date, int> label_of;
    for (const auto& s : scores) label_of.emplace(s.date, static_cast<int>(s.label));

    TrainParams params;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 7;
    if (!a.params.empty()) {
        const auto j = parse_json(read_file(a.params), a.params);
        params = train_params_from_json(j);
        test_fraction = j.value("test_fraction", test_fraction);
        split_seed = j.value("split_seed", split_seed);
    }
    params.check();

    std::vector<std::size_t> rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        if (auto it = label_of.find(X.dates[i]); it != label_of.end()) {
            rows.push_back(i);
            y.push_back(it->second);
        }
    }
    if (rows.empty()) throw Error(ErrorCode::data, "no feature rows have a label");
    params.n_classes = std::max(params.n_classes, 3);

    Split split;
    if (test_fraction > 0.0) {
        split = stratified_split(y, test_fraction, split_seed);
    } else {
        for (std::size_t i = 0; i < y.size(); ++i) split.train.push_back(i);
    }
    std::vector<std::size_t> train_rows;
    std::vector<int> y_train;
    for (auto i : split.train) {
        train_rows.push_back(rows[i]);
        y_train.push_back(y[i]);
    }
    TrainTrace trace;
    const auto model = train(X.select_rows(train_rows), y_train, params, {}, &trace);
    write_file_atomic(a.out, model_to_json(model));
    if (!a.holdout_out.empty()) {
        std::vector<std::size_t> test_rows;
        for (auto i : split.test) test_rows.push_back(rows[i]);
        write_file_atomic(a.holdout_out, feature_matrix_csv(X.select_rows(test_rows)));
    }
    log::info("train: " + std::to_string(train_rows.size()) + " rows, " + std::to_string(split.test.size()) +
              " held out, final log-loss " + format_double(trace.log_loss.back()));
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string model;
    std::string features;
    std::string out;
};

void require_columns(const TreeEnsemble& model, const FeatureMatrix& X) {
    if (model.feature_names != X.feature_names) {
        throw Error(ErrorCode::dimension, "feature columns do not match the model's feature names");
    }
}

int cmd_predict(const PredictArgs& a) {
    const auto model = model_from_json(read_file(a.model));
    const auto X = read_features(a.features);
    require_columns(model, X);
    const auto names = class_names(model.n_classes);
    std::string out = "date,label";
    for (const auto& n : names) out += ",p_" + n;
    out += '\n';
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto p = predict_proba(model, X.row(i));
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        out += X.dates[i].iso() + "," + names[best];
        for (double v : p) out += "," + format_double(v);
        out += '\n';
    }
    write_file_atomic(a.out, out);
    return 0;
}

// ---------------------------------------------------------------- explain

struct ExplainArgs {
    std::string model;
    std::string data;
    std::size_t top_k = kDefaultRegressorCount;
    std::size_t samples = 0;
    std::string out;
};

int cmd_explain(const ExplainArgs& a) {
    const auto model = model_from_json(read_file(a.model));
    const auto X = read_features(a.data);
    require_columns(model, X);
    const auto g = global_importance(model, X);
    const auto selected = select_regressors(g, a.top_k);

    Json j;
    j["global"] = importance_to_json(g);
    j["selected_regressors"] = selected;
    Json samples = Json::array();
    const std::size_t first = a.samples == 0 || a.samples >= X.rows() ? 0 : X.rows() - a.samples;
    for (std::size_t i = first; i < X.rows(); ++i) {
        const auto attr = tree_shap(model, X.row(i));
        Json s;
        s["date"] = X.dates[i].iso();
        s["predicted"] = static_cast<int>(std::max_element(attr.margin.begin(), attr.margin.end()) - attr.margin.begin());
        s["attribution"] = Json::parse(attribution_json(attr, model.feature_names));
        samples.push_back(std::move(s));
    }
    j["samples"] = samples;
    write_file_atomic(a.out, j.dump(2) + "\n");
    std::string sel;
    for (const auto& s : selected) sel += (sel.empty() ? "" : ", ") + s;
    log::info("explain: top feature " + g.feature_names[g.order.front()] + "; regressors " + sel);
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastArgs {
    std::string scores;
    std::string regressors;
    std::string config;
    std::string shap;
    std::string names;
    std::optional<std::size_t> top_k;
    int horizon = 12;
    std::string model_out;
    std::string out;
};

int cmd_forecast(const ForecastArgs& a) {
    const auto scores = parse_scores_csv(read_file(a.scores));
    ForecastConfig cfg;
    std::vector<std::string> names;
    std::string shap_path = a.shap;
    std::size_t top_k = kDefaultRegressorCount;
    if (!a.config.empty()) {
        const auto j = parse_json(read_file(a.config), a.config);
        cfg = forecast_config_from_json(j);
        if (j.contains("regressors")) names = j["regressors"].get<std::vector<std::string>>();
        if (shap_path.empty() && j.contains("shap")) {
            shap_path = (std::filesystem::path(a.config).parent_path() / j["shap"].get<std::string>()).string();
        }
        top_k = j.value("top_k", top_k);
    }
    if (a.top_k) top_k = *a.top_k;
    if (!a.names.empty()) {
        names.clear();
        for (auto n : split(a.names, ',')) names.emplace_back(n);
    } else if (!shap_path.empty()) {
        const auto j = parse_json(read_file(shap_path), shap_path);
        names = select_regressors(importance_from_json(j.at("global")), top_k);
    }
    cfg.check();

    FeatureMatrix daily;
    if (!a.regressors.empty()) {
        daily = read_features(a.regressors);
        if (names.empty() && a.names.empty() && shap_path.empty()) {
            for (const auto& n : daily.feature_names) {
                if (n != "month") names.push_back(n);
            }
        }
    } else if (!names.empty()) {
        throw Error(ErrorCode::precondition, "regressor names given without --regressors");
    }

    std::vector<Date> dates;
    std::vector<double> values;
    for (const auto& s : scores) {
        dates.push_back(s.date);
        values.push_back(s.score);
    }
    WeeklyDataset data;
    if (!a.regressors.empty()) {
        data = align_weekly(dates, values, daily, names);
    } else {
        for (const auto& p : weekly_resample(dates, values)) {
            data.y.weeks.push_back(p.week_start);
            data.y.values.push_back(p.value);
        }
    }
    const auto model = fit(data.y, data.regressors, cfg);
    const auto result = predict(model, a.horizon);
    if (!a.model_out.empty()) write_file_atomic(a.model_out, forecast_model_to_json(model));
    write_file_atomic(a.out, forecast_csv(result));
    std::string reg;
    for (const auto& n : model.regressor_names) reg += (reg.empty() ? "" : ", ") + n;
    log::info("forecast: " + std::to_string(data.y.weeks.size()) + " weeks, horizon " + std::to_string(a.horizon) +
              ", regressors [" + reg + "], sigma " + format_double(model.residual_sigma));
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string pred;
    std::string truth;
    std::string out;
};

// Pairs rows by the shared key column when both tables have one, otherwise by position.
std::vector<std::pair<std::size_t, std::size_t>> pair_rows(const Table& p, const Table& t) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto pk = first_column(p, {"date", "week_start"});
    const auto tk = first_column(t, {"date", "week_start"});
    if (pk && tk) {
        std::map<std::string, std::size_t> idx;
        for (std::size_t i = 0; i < t.rows.size(); ++i) idx.emplace(t.rows[i][*tk], i);
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            const auto it = idx.find(p.rows[i][*pk]);
            if (it == idx.end()) {
                throw ParseError(ErrorCode::row, static_cast<int>(i + 2),
                                 "prediction for " + p.rows[i][*pk] + " has no ground truth");
            }
            out.emplace_back(i, it->second);
        }
        return out;
    }
    if (p.rows.size() != t.rows.size()) throw Error(ErrorCode::dimension, "prediction and truth lengths differ");
    for (std::size_t i = 0; i < p.rows.size(); ++i) out.emplace_back(i, i);
    return out;
}

int cmd_eval(const EvalArgs& a) {
    const auto p = read_table(a.pred);
    const auto t = read_table(a.truth);
    const auto pairs = pair_rows(p, t);
    const auto pl = p.column("label");
    const auto tl = t.column("label");
    if (pl && tl) {
        std::vector<int> yp, yt;
        for (auto [i, j] : pairs) {
            yp.push_back(parse_class(p.rows[i][*pl], static_cast<int>(i + 2)));
            yt.push_back(parse_class(t.rows[j][*tl], static_cast<int>(j + 2)));
        }
        const int k = std::max({3, *std::max_element(yp.begin(), yp.end()) + 1,
                                *std::max_element(yt.begin(), yt.end()) + 1});
        const auto cm = confusion(yt, yp, static_cast<std::size_t>(k));
        const auto r = report(cm);
        const auto names = class_names(k);
        write_file_atomic(a.out, report_json(r, cm, names));
        std::cerr << report_table(r, names);
        return 0;
    }
    const auto pv = first_column(p, {"yhat", "score", "value", "mpi"});
    const auto tv = first_column(t, {"value", "score", "y", "mpi", "yhat"});
    if (!pv || !tv) throw Error(ErrorCode::schema, "no label or numeric value column to compare");
    std::vector<double> yp, yt;
    for (auto [i, j] : pairs) {
        yp.push_back(parse_number(p.rows[i][*pv], static_cast<int>(i + 2)));
        yt.push_back(parse_number(t.rows[j][*tv], static_cast<int>(j + 2)));
    }
    const auto m = regression(yt, yp);
    write_file_atomic(a.out, regression_json(m, yt.size()));
    log::info("eval: mae " + format_double(m.mae) + ", rmse " + format_double(m.rmse));
    return 0;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
    std::string config;
    std::string host;
    int port = -1;
};

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a) {
    const auto base = std::filesystem::path(a.config).parent_path().string();
    auto cfg = service_config_from_json(read_file(a.config), base.empty() ? "." : base);
    if (!a.host.empty()) cfg.host = a.host;
    if (a.port >= 0) cfg.port = a.port;
    Service service(load_artifacts(cfg), cfg.cache_capacity);
    HttpServer server(service, cfg.body_limit);
    const int port = server.bind(cfg.host, cfg.port);
    if (port < 0) throw Error(ErrorCode::io, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    log::info("serve: listening on http://" + cfg.host + ":" + std::to_string(port));
    std::cout << "listening on " << cfg.host << ":" << port << std::endl;
    server.run();
    g_server = nullptr;
    return 0;
}

template <typename F>
int guarded(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        log::error(std::string(name) + ": " + e.what());
        return e.code() == ErrorCode::validation ? 3 : 1;
    } catch (const std::exception& e) {
        log::error(std::string(name) + ": " + e.what());
        return 1;
    }
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Maintenance pressure risk engine", "mpirisk"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic daily series");
    s->add_option("--seed", synth.seed);
    s->add_option("--days", synth.days)->check(CLI::PositiveNumber);
    s->add_option("--start", synth.start, "First date (YYYY-MM-DD)");
    s->add_option("--out", synth.out)->required();

    IngestArgs ingest;
    auto* in = app.add_subcommand("ingest", "Validate and normalize a daily CSV, optionally merged with POWER data");
    in->add_option("--input", ingest.input)->required();
    in->add_option("--power", ingest.power, "lat,lon,start,end; AOD still comes from --input");
    in->add_option("--power-url", ingest.power_url);
    in->add_flag("--fill-gaps", ingest.fill_gaps, "Forward-fill missing calendar days");
    in->add_option("--report", ingest.report, "Write the validation report as JSON");
    in->add_option("--out", ingest.out)->required();

    FeaturizeArgs feat;
    auto* f = app.add_subcommand("featurize", "Build the scaled feature matrix");
    f->add_option("--input", feat.input)->required();
    f->add_option("--spec", feat.spec);
    f->add_option("--scaler", feat.scaler, "Apply an existing scaler instead of fitting");
    f->add_option("--scaler-out", feat.scaler_out);
    f->add_option("--train-end", feat.train_end, "Fit the scaler on rows up to this date");
    f->add_option("--out", feat.out)->required();

    IndexArgs index;
    auto* ix = app.add_subcommand("index", "Score daily MPI and risk bands");
    ix->add_option("--input", index.input)->required();
    ix->add_option("--config", index.config);
    ix->add_flag("--derive-eof", index.derive_eof);
    ix->add_option("--config-out", index.config_out, "Write the resolved configuration");
    ix->add_option("--out", index.out)->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the surrogate classifier");
    t->add_option("--features", tr.features)->required();
    t->add_option("--labels", tr.labels)->required();
    t->add_option("--params", tr.params);
    t->add_option("--holdout-out", tr.holdout_out, "Write held-out feature rows");
    t->add_option("--out", tr.out)->required();

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Classify feature rows");
    p->add_option("--model", pr.model)->required();
    p->add_option("--features", pr.features)->required();
    p->add_option("--out", pr.out)->required();

    ExplainArgs ex;
    auto* e = app.add_subcommand("explain", "Shapley attributions and regressor selection");
    e->add_option("--model", ex.model)->required();
    e->add_option("--data", ex.data)->required();
    e->add_option("--top-k", ex.top_k)->check(CLI::NonNegativeNumber);
    e->add_option("--samples", ex.samples, "Attribute only the last N rows (0 = all)");
    e->add_option("--out", ex.out)->required();

    ForecastArgs fc;
    auto* fo = app.add_subcommand("forecast", "Weekly MPI forecast");
    fo->add_option("--scores", fc.scores)->required();
    fo->add_option("--regressors", fc.regressors, "Daily feature CSV");
    fo->add_option("--config", fc.config);
    fo->add_option("--shap", fc.shap, "Select regressors from an explain output");
    fo->add_option("--regressor-names", fc.names, "Comma-separated feature columns");
    fo->add_option("--top-k", fc.top_k)->check(CLI::NonNegativeNumber);
    fo->add_option("--horizon", fc.horizon)->check(CLI::Range(1, kMaxHorizon));
    fo->add_option("--model-out", fc.model_out);
    fo->add_option("--out", fc.out)->required();

    ServeArgs sv;
    auto* se = app.add_subcommand("serve", "Run the HTTP service");
    se->add_option("--config", sv.config)->required();
    se->add_option("--host", sv.host);
    se->add_option("--port", sv.port)->check(CLI::Range(0, 65535));

    EvalArgs ev;
    auto* va = app.add_subcommand("eval", "Compare predictions with ground truth");
    va->add_option("--pred", ev.pred)->required();
    va->add_option("--true", ev.truth)->required();
    va->add_option("--out", ev.out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& err) {
        std::cerr << "error: " << err.what() << "\n\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 2;
    }

    if (*s) return guarded("synth", [&] { return cmd_synth(synth); });
    if (*in) return guarded("ingest", [&] { return cmd_ingest(ingest); });
    if (*f) return guarded("featurize", [&] { return cmd_featurize(feat); });
    if (*ix) return guarded("index", [&] { return cmd_index(index); });
    if (*t) return guarded("train", [&] { return cmd_train(tr); });
    if (*p) return guarded("predict", [&] { return cmd_predict(pr); });
    if (*e) return guarded("explain", [&] { return cmd_explain(ex); });
    if (*fo) return guarded("forecast", [&] { return cmd_forecast(fc); });
    if (*se) return guarded("serve", [&] { return cmd_serve(sv); });
    if (*va) return guarded("eval", [&] { return cmd_eval(ev); });
    return 2;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace mpirisk::cli
