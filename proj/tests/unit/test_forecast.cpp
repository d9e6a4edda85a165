#include "mpirisk/error.hpp"
#include "mpirisk/forecast.hpp"
#include "mpirisk/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

using namespace mpirisk;

namespace {

const Date kStart = Date::from_ymd(2019, 1, 7);

WeeklySeries weekly(int n, const std::function<double(double)>& f, Date start = kStart) {
    WeeklySeries s;
    for (int i = 0; i < n; ++i) {
        s.weeks.push_back(start + 7 * i);
        s.values.push_back(f(static_cast<double>(i)));
    }
    return s;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

GlobalImportance ranking(std::vector<std::string> names) {
    GlobalImportance g;
    g.feature_names = std::move(names);
    for (std::size_t i = 0; i < g.feature_names.size(); ++i) {
        g.mean_abs.push_back(static_cast<double>(g.feature_names.size() - i));
        g.order.push_back(i);
    }
    return g;
}

}  // namespace

TEST_CASE("constant series recovers the intercept only") {
    const auto m = fit(weekly(156, [](double) { return 3.0; }), {}, ForecastConfig{});
    CHECK(std::abs(m.intercept - 3.0) <= 1e-6);
    CHECK(std::abs(m.slope) <= 1e-6);
    for (double d : m.deltas) CHECK(std::abs(d) <= 1e-6);
    for (double f : m.fourier) CHECK(std::abs(f) <= 1e-6);
    CHECK(m.residual_sigma <= 1e-6);

    const auto r = predict(m, 12);
    for (const auto& p : r.points) {
        CHECK(std::abs(p.yhat - 3.0) <= 1e-6);
        CHECK(p.upper - p.lower <= 1e-5);
    }
}

TEST_CASE("straight line recovers slope and extrapolates") {
    auto line = [](double t) { return 0.1 + 0.02 * t; };
    const auto m = fit(weekly(156, line), {}, ForecastConfig{});
    CHECK(std::abs(m.slope - 0.02) <= 1e-4);
    for (double d : m.deltas) CHECK(std::abs(d) <= 1e-6);

    const auto r = predict(m, 12);
    REQUIRE(r.points.size() == 12);
    for (std::size_t h = 0; h < r.points.size(); ++h) {
        const double truth = line(156.0 + static_cast<double>(h));
        CHECK(std::abs(r.points[h].yhat - truth) <= 1e-3);
    }
}

TEST_CASE("seasonal component tracks a yearly sinusoid") {
    const double period = 52.18;
    auto wave = [&](double t) { return 0.2 * std::sin(2.0 * std::numbers::pi * t / period); };
    const auto m = fit(weekly(208, [&](double t) { return 0.5 + wave(t); }), {}, ForecastConfig{});
    const auto ins = in_sample(m);
    std::vector<double> seasonal, truth;
    for (std::size_t i = 0; i < ins.points.size(); ++i) {
        seasonal.push_back(ins.points[i].seasonal);
        truth.push_back(wave(static_cast<double>(i)));
    }
    CHECK(pearson(seasonal, truth) > 0.99);
}

TEST_CASE("horizon contract and week spacing") {
    const auto m = fit(weekly(120, [](double t) { return 0.3 + 0.001 * t; }), {}, ForecastConfig{});
    for (int h : {1, 4, 12, 52, 100}) {
        const auto r = predict(m, h);
        REQUIRE(r.points.size() == static_cast<std::size_t>(h));
        CHECK(r.points.front().week_start == m.history.weeks.back() + 7);
        for (std::size_t i = 1; i < r.points.size(); ++i) {
            CHECK(r.points[i].week_start - r.points[i - 1].week_start == 7);
        }
    }
    CHECK_THROWS_AS(predict(m, 0), Error);
    CHECK_THROWS_AS(predict(m, -3), Error);
}

TEST_CASE("fit preconditions") {
    ForecastConfig c;
    CHECK_THROWS_AS(fit(weekly(2 * (c.n_changepoints + 2) - 1, [](double) { return 1.0; }), {}, c), Error);
    CHECK_NOTHROW(fit(weekly(2 * (c.n_changepoints + 2), [](double) { return 1.0; }), {}, c));

    const auto y = weekly(60, [](double t) { return t; });
    std::vector<Regressor> bad{{"x", std::vector<double>(59, 1.0)}};
    CHECK_THROWS_AS(fit(y, bad, c), Error);

    auto unsorted = y;
    std::swap(unsorted.weeks[3], unsorted.weeks[4]);
    CHECK_THROWS_AS(fit(unsorted, {}, c), Error);

    auto bad_cfg = c;
    bad_cfg.interval_level = 1.0;
    CHECK_THROWS_AS(fit(y, {}, bad_cfg), Error);
    bad_cfg = c;
    bad_cfg.trend_l2 = -1.0;
    CHECK_THROWS_AS(fit(y, {}, bad_cfg), Error);
    bad_cfg = c;
    bad_cfg.yearly_order = 0;
    CHECK_THROWS_AS(fit(y, {}, bad_cfg), Error);
}

TEST_CASE("z quantile") {
    CHECK(z_for_level(0.80) == doctest::Approx(1.2816).epsilon(1e-4));
    CHECK(z_for_level(0.95) == doctest::Approx(1.95996).epsilon(1e-5));
    CHECK_THROWS_AS(z_for_level(0.0), Error);
    CHECK_THROWS_AS(z_for_level(1.0), Error);
}

namespace {

struct NoisyData {
    WeeklySeries y;
    std::vector<Regressor> regs;
};

NoisyData noisy(std::uint64_t seed, int n) {
    SequentialRng rng(seed, 1);
    NoisyData d;
    Regressor hum{"humidity", {}}, temp{"temperature", {}};
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        const double h = 60.0 + 10.0 * std::sin(t / 9.0) + rng.normal();
        const double tc = 30.0 + 5.0 * std::cos(t / 13.0) + rng.normal();
        hum.values.push_back(h);
        temp.values.push_back(tc);
        d.y.weeks.push_back(kStart + 7 * i);
        d.y.values.push_back(0.2 + 0.001 * t + 0.01 * (h - 60.0) + 0.1 * std::sin(2.0 * std::numbers::pi * t / 52.18) +
                             0.05 * rng.normal());
    }
    d.regs = {hum, temp};
    return d;
}

}  // namespace

TEST_CASE("properties on noisy data with regressors") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto d = noisy(seed, 150);
        const auto m = fit(d.y, d.regs, ForecastConfig{});
        CHECK(m.residual_sigma >= 0.0);

        // additivity and ordering of bounds
        for (const auto& r : {predict(m, 52), in_sample(m)}) {
            for (const auto& p : r.points) {
                CHECK(std::abs(p.trend + p.seasonal + p.regressors - p.yhat) <= 1e-9);
                CHECK(p.lower <= p.yhat);
                CHECK(p.yhat <= p.upper);
            }
        }

        // in-sample MSE no worse than predicting the mean
        double mean = 0.0;
        for (double v : d.y.values) mean += v;
        mean /= static_cast<double>(d.y.values.size());
        double var = 0.0, mse = 0.0;
        for (std::size_t i = 0; i < d.y.values.size(); ++i) {
            var += (d.y.values[i] - mean) * (d.y.values[i] - mean);
            mse += (d.y.values[i] - m.fitted[i]) * (d.y.values[i] - m.fitted[i]);
        }
        CHECK(mse <= var);

        // wider level never narrows
        auto wide_cfg = m.config;
        wide_cfg.interval_level = 0.95;
        const auto wide = fit(d.y, d.regs, wide_cfg);
        const auto a = predict(m, 12), b = predict(wide, 12);
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            CHECK(b.points[i].lower <= a.points[i].lower);
            CHECK(b.points[i].upper >= a.points[i].upper);
        }
    }
}

TEST_CASE("time-shift equivariance") {
    const auto d = noisy(11, 130);
    const auto m = fit(d.y, d.regs, ForecastConfig{});
    auto shifted = d.y;
    for (auto& w : shifted.weeks) w = w + 7 * 300 + 3;
    const auto s = fit(shifted, d.regs, ForecastConfig{});
    const auto a = predict(m, 26), b = predict(s, 26);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(b.points[i].week_start - a.points[i].week_start == 7 * 300 + 3);
        CHECK(a.points[i].yhat == b.points[i].yhat);
        CHECK(a.points[i].lower == b.points[i].lower);
    }
}

TEST_CASE("forward fill uses the last observed regressor values") {
    const auto d = noisy(3, 120);
    const auto m = fit(d.y, d.regs, ForecastConfig{});
    std::vector<Regressor> future;
    for (const auto& r : d.regs) future.push_back({r.name, std::vector<double>(8, r.values.back())});
    const auto a = predict(m, 8);
    const auto b = predict_with_regressors(m, 8, future);
    for (std::size_t i = 0; i < 8; ++i) CHECK(a.points[i].yhat == b.points[i].yhat);
    for (std::size_t i = 1; i < 8; ++i) CHECK(a.points[i].regressors == a.points[0].regressors);

    std::vector<Regressor> short_future{{"humidity", {1.0}}, {"temperature", {1.0}}};
    CHECK_THROWS_AS(predict_with_regressors(m, 8, short_future), Error);
    CHECK_THROWS_AS(predict_with_regressors(m, 8, std::span<const Regressor>(future).first(1)), Error);
}

TEST_CASE("refit matches a fresh fit") {
    const auto d = noisy(5, 110);
    const auto m = fit(d.y, d.regs, ForecastConfig{});
    std::vector<double> y2 = d.y.values;
    for (auto& v : y2) v *= 0.5;
    const auto r = refit(m, y2);
    const auto f = fit(WeeklySeries{d.y.weeks, y2}, d.regs, ForecastConfig{});
    CHECK(r.intercept == f.intercept);
    CHECK(r.beta == f.beta);
    CHECK(r.fourier == f.fourier);
}

TEST_CASE("model JSON round trip reproduces forecasts") {
    const auto d = noisy(7, 140);
    const auto m = fit(d.y, d.regs, ForecastConfig{});
    const auto text = forecast_model_to_json(m);
    const auto back = forecast_model_from_json(text);
    CHECK(forecast_model_to_json(back) == text);
    CHECK(forecast_csv(predict(back, 52)) == forecast_csv(predict(m, 52)));
    CHECK_THROWS_AS(forecast_model_from_json("{\"format\":\"other\"}"), Error);
    CHECK_THROWS_AS(forecast_model_from_json("not json"), Error);
}

TEST_CASE("forecast csv layout") {
    const auto m = fit(weekly(80, [](double) { return 1.0; }), {}, ForecastConfig{});
    const auto csv = forecast_csv(predict(m, 52));
    CHECK(csv.rfind("week_start,yhat,lower,upper,trend,seasonal,regressors\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 53);
}

TEST_CASE("select_regressors collapses variants") {
    const auto g = ranking({"humidity_roll7", "humidity", "temperature_lag1", "month", "aod", "wind_speed_roll3",
                            "temperature", "solar_irradiance_lag_1"});
    CHECK(select_regressors(g, 0).empty());
    CHECK(select_regressors(g, 2) == std::vector<std::string>{"humidity_roll7", "temperature_lag1"});
    const auto all = select_regressors(g, 100);
    CHECK(all == std::vector<std::string>{"humidity_roll7", "temperature_lag1", "aod", "wind_speed_roll3",
                                          "solar_irradiance_lag_1"});
    CHECK(std::set<std::string>(all.begin(), all.end()).size() == all.size());
}

TEST_CASE("align_weekly joins on shared days") {
    FeatureMatrix X;
    X.feature_names = {"humidity", "temperature"};
    std::vector<Date> dates;
    std::vector<double> scores;
    for (int i = 0; i < 28; ++i) {
        const Date d = kStart + i;
        dates.push_back(d);
        scores.push_back(i < 7 ? 0.0 : 1.0);
        if (i == 3) continue;
        X.dates.push_back(d);
        X.values.push_back(static_cast<double>(i));
        X.values.push_back(2.0);
    }
    const std::vector<std::string> names{"humidity"};
    const auto w = align_weekly(dates, scores, X, names);
    REQUIRE(w.y.values.size() == 4);
    CHECK(w.y.weeks.front() == kStart);
    CHECK(w.y.values[0] == 0.0);
    CHECK(w.regressors[0].values[0] == doctest::Approx((0 + 1 + 2 + 4 + 5 + 6) / 6.0));
    const std::vector<std::string> missing{"nope"};
    CHECK_THROWS_AS(align_weekly(dates, scores, X, missing), Error);
}

TEST_CASE("decomposition of a 30-day cycle") {
    std::vector<double> y;
    for (int t = 0; t < 300; ++t) y.push_back(5.0 + std::sin(2.0 * std::numbers::pi * t / 30.0));
    const auto d = decompose(y, 30);
    REQUIRE(d.trend.size() == y.size());
    CHECK(d.first == 15);
    CHECK(d.last == 284);
    double ss = 0.0;
    for (std::size_t i = d.first; i <= d.last; ++i) {
        CHECK(std::abs(d.trend[i] - 5.0) <= 0.05);
        CHECK(d.trend[i] + d.seasonal[i] + d.residual[i] == y[i]);
        ss += d.residual[i] * d.residual[i];
    }
    CHECK(std::sqrt(ss / static_cast<double>(d.last - d.first + 1)) < 0.05);
    CHECK(std::isnan(d.trend[0]));
    CHECK(std::isnan(d.residual[299]));
}

TEST_CASE("decomposition of a constant series") {
    for (int period : {7, 30}) {
        const std::vector<double> y(100, 2.5);
        const auto d = decompose(y, period);
        for (double s : d.seasonal) CHECK(s == 0.0);
        for (std::size_t i = d.first; i <= d.last; ++i) CHECK(d.residual[i] == 0.0);
    }
}

TEST_CASE("decomposition needs two periods") {
    const std::vector<double> y(59, 1.0);
    CHECK_THROWS_AS(decompose(y, 30), Error);
    CHECK_NOTHROW(decompose(std::vector<double>(60, 1.0), 30));
}
