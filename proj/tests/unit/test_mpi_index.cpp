#include "mpirisk/error.hpp"
#include "mpirisk/mpi_index.hpp"
#include "mpirisk/rng.hpp"
#include "mpirisk/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mpirisk;

namespace {

const Weights kTable2{0.35, 0.25, 0.20, 0.15, 0.05};

ResolvedThresholds table2(double irr_cut = 10.0) { return {0.9, 35.0, 70.0, 5.0, irr_cut}; }

EnvRecord day(double aod, double t, double h, double w) { return {Date::from_ymd(2022, 6, 1), aod, t, h, w, 250.0}; }

TriggerVector fired(std::initializer_list<int> on) {
    TriggerVector v;
    for (int i : on) v.fired[static_cast<std::size_t>(i)] = true;
    return v;
}

// Percentile by explicit order statistics: sorted[floor(p)] + frac * gap.
double oracle_percentile(std::vector<double> v, double rank) {
    std::sort(v.begin(), v.end());
    const double pos = (static_cast<double>(v.size()) - 1.0) * rank / 100.0;
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("table 2 defaults") {
    const MpiConfig cfg;
    CHECK(cfg.weights == kTable2);
    CHECK(cfg.thresholds.aod == 0.9);
    CHECK(cfg.thresholds.temperature == 35.0);
    CHECK(cfg.thresholds.humidity == 70.0);
    CHECK(cfg.thresholds.wind_speed == 5.0);
    CHECK(cfg.thresholds.irr_var_percentile == 90.0);
    CHECK(cfg.band_edges.low_upper == 0.3);
    CHECK(cfg.band_edges.high_lower == 0.6);
    CHECK_NOTHROW(cfg.check());
}

TEST_CASE("irradiance variability examples") {
    EnvSeries s = testing::simple_series(6);
    for (auto& r : s.records) r.solar_irradiance = 500.0;
    const auto flat = irr_variability(s);
    CHECK(flat.size() == 4);
    for (double x : flat) CHECK(x == 0.0);

    EnvSeries three = testing::simple_series(3);
    three.records[0].solar_irradiance = 800;
    three.records[1].solar_irradiance = 800;
    three.records[2].solar_irradiance = 803;
    const auto v = irr_variability(three);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
    CHECK_THROWS_AS(irr_variability(testing::simple_series(2)), Error);
}

TEST_CASE("percentile examples") {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    CHECK(resolve_irr_threshold(v, 90) == doctest::Approx(90.1).epsilon(1e-14));
    CHECK(resolve_irr_threshold(std::vector<double>{4, 4, 4, 4}, 37) == 4.0);
    CHECK(resolve_irr_threshold(std::vector<double>{4, 1, 3, 2}, 50) == 2.5);
    CHECK_THROWS_AS(resolve_irr_threshold(std::vector<double>{}, 50), Error);
}

TEST_CASE("percentile matches the order statistic oracle") {
    SequentialRng rng(3, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng.below(60));
        for (auto& x : v) x = rng.normal();
        const double rank = rng.uniform() * 100.0;
        CHECK(resolve_irr_threshold(v, rank) == doctest::Approx(oracle_percentile(v, rank)).epsilon(1e-12));
    }
}

TEST_CASE("trigger examples") {
    const auto th = table2(10.0);
    auto t = compute_triggers(day(1.2, 40, 50, 3), 5.0, th);
    CHECK(t.fired == std::array<bool, 5>{true, true, false, false, false});
    CHECK(t.values[0] == 1.2);
    CHECK(t.values[4] == 5.0);
    t = compute_triggers(day(0.9, 35, 70, 5), 10.0, th);
    CHECK(t.fired == std::array<bool, 5>{});
    t = compute_triggers(day(9, 90, 99, 30), 1000.0, th);
    CHECK(t.fired == std::array<bool, 5>{true, true, true, true, true});
}

TEST_CASE("mpi examples with table 2 weights") {
    const double all = compute_mpi(fired({0, 1, 2, 3, 4}), kTable2);
    CHECK(all == 1.0);
    const double two = compute_mpi(fired({0, 1}), kTable2);
    CHECK(two == 0.6);
    CHECK(compute_mpi(fired({}), kTable2) == 0.0);
    CHECK(label_risk(all, {}) == RiskLabel::High);
    CHECK(label_risk(two, {}) == RiskLabel::High);
}

TEST_CASE("eof examples") {
    const auto w = eof_weights({0.70, 0.50, 0.40, 0.30, 0.10});
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(w[i] - kTable2[i]) <= 1e-12);
    const auto u = eof_weights({0.3, 0.3, 0.3, 0.3, 0.3});
    for (double x : u) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));
    try {
        eof_weights({0.5, 0.0, 0.2, 0.1, 0.1});
        FAIL("expected degenerate");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate);
        CHECK(std::string(e.what()).find("temp_high") != std::string::npos);
    }
}

TEST_CASE("derived eof weights sum to one and match counted frequencies") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        ScenarioSpec spec;
        spec.seed = seed;
        spec.days = 400;
        const auto s = generate(spec);
        const MpiConfig cfg;
        const auto w = derive_eof_weights(s, cfg);
        double sum = 0.0;
        for (double x : w) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        const auto irr = irr_variability(s);
        const auto th = resolve_thresholds(cfg, irr);
        std::array<double, 5> count{};
        for (std::size_t i = 2; i < s.records.size(); ++i) {
            const auto& r = s.records[i];
            count[0] += r.aod > th.aod;
            count[1] += r.temperature > th.temperature;
            count[2] += r.humidity > th.humidity;
            count[3] += r.wind_speed > th.wind_speed;
            count[4] += irr[i - 2] > th.irr_var;
        }
        double total = 0.0;
        for (double c : count) total += c;
        for (std::size_t k = 0; k < 5; ++k) CHECK(w[k] == doctest::Approx(count[k] / total).epsilon(1e-12));
    }
    CHECK_THROWS_AS(derive_eof_weights(testing::simple_series(20), MpiConfig{}), Error);
}

TEST_CASE("band examples") {
    const BandEdges e;
    CHECK(label_risk(0.60, e) == RiskLabel::High);
    CHECK(label_risk(0.30, e) == RiskLabel::Medium);
    CHECK(label_risk(0.29, e) == RiskLabel::Low);
    CHECK(label_risk(0.0, e) == RiskLabel::Low);
    CHECK(label_risk(1.0, e) == RiskLabel::High);
    CHECK(label_risk(0.35 + 0.25, e) == RiskLabel::High);
    CHECK(label_risk(0.15 + 0.1, e) == RiskLabel::Low);
}

TEST_CASE("percentile band mode on a four point distribution") {
    const std::vector<double> scores{0.0, 0.2, 0.45, 0.8};
    const auto e = percentile_band_edges(scores);
    CHECK(e.low_upper == doctest::Approx(oracle_percentile(scores, 50)));
    CHECK(e.high_lower == doctest::Approx(oracle_percentile(scores, 75)));
    CHECK(label_risk(0.0, e) == RiskLabel::Low);
    CHECK(label_risk(0.2, e) == RiskLabel::Low);
    CHECK(label_risk(0.45, e) == RiskLabel::Medium);
    CHECK(label_risk(0.8, e) == RiskLabel::High);
}

TEST_CASE("percentile mode relabels a scored series") {
    ScenarioSpec spec;
    spec.days = 365;
    const auto s = generate(spec);
    MpiConfig cfg;
    cfg.band_mode = BandMode::percentile;
    const auto scored = score_series(s, cfg);
    std::vector<double> values;
    for (const auto& x : scored) values.push_back(x.score);
    const auto e = percentile_band_edges(values);
    for (const auto& x : scored) CHECK(x.label == label_risk(x.score, e));
}

TEST_CASE("weekly resample examples") {
    const auto d0 = Date::from_ymd(2022, 1, 3);
    std::vector<Date> dates;
    for (int i = 0; i < 14; ++i) dates.push_back(d0 + i);
    auto w = weekly_resample(dates, std::vector<double>(14, 0.4));
    REQUIRE(w.size() == 2);
    CHECK(w[0].value == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(w[1].week_start == d0 + 7);

    dates.resize(10);
    CHECK(weekly_resample(dates, std::vector<double>(10, 1.0)).size() == 1);

    dates.resize(7);
    w = weekly_resample(dates, std::vector<double>{0, 0, 0, 0, 0, 0, 0.7});
    REQUIRE(w.size() == 1);
    CHECK(w[0].value == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("weekly resample skips missing days and honours the anchor") {
    const auto d0 = Date::from_ymd(2022, 1, 3);
    std::vector<Date> dates{d0, d0 + 2, d0 + 6, d0 + 15, d0 + 20};
    const std::vector<double> v{1, 2, 3, 10, 20};
    const auto w = weekly_resample(dates, v);
    // blocks [0,6] and [14,20]; the empty middle block is dropped
    REQUIRE(w.size() == 2);
    CHECK(w[0].value == 2.0);
    CHECK(w[1].week_start == d0 + 14);
    CHECK(w[1].value == 15.0);
    const auto anchored = weekly_resample(dates, v, d0 - 3);
    // [d0-3, d0+3], [d0+4, d0+10], [d0+11, d0+17]; the block ending d0+24 is incomplete
    REQUIRE(anchored.size() == 3);
    CHECK(anchored[0].week_start == d0 - 3);
    CHECK(anchored[0].value == 1.5);
    CHECK(anchored[1].value == 3.0);
    CHECK(anchored[2].week_start == d0 + 11);
    CHECK(anchored[2].value == 10.0);
}

TEST_CASE("mpi properties over random trigger vectors") {
    SequentialRng rng(17, 0);
    for (int trial = 0; trial < 2000; ++trial) {
        Weights w{};
        double sum = 0.0;
        for (auto& x : w) sum += (x = rng.uniform());
        for (auto& x : w) x /= sum;
        TriggerVector t;
        for (auto& f : t.fired) f = rng.uniform() < 0.5;
        const double m = compute_mpi(t, w);
        CHECK(m >= 0.0);
        CHECK(m <= 1.0 + 1e-15);
        for (std::size_t k = 0; k < 5; ++k) {
            if (t.fired[k]) continue;
            auto more = t;
            more.fired[k] = true;
            CHECK(compute_mpi(more, w) >= m);
        }
        // permuting conditions together with their weights
        std::array<std::size_t, 5> perm{0, 1, 2, 3, 4};
        for (std::size_t i = 4; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
        Weights pw{};
        TriggerVector pt;
        for (std::size_t k = 0; k < 5; ++k) {
            pw[k] = w[perm[k]];
            pt.fired[k] = t.fired[perm[k]];
        }
        CHECK(compute_mpi(pt, pw) == doctest::Approx(m).epsilon(1e-15));
    }
}

TEST_CASE("label_risk is monotone") {
    const BandEdges e;
    RiskLabel prev = RiskLabel::Low;
    for (int i = 0; i <= 1000; ++i) {
        const auto l = label_risk(i / 1000.0, e);
        CHECK(static_cast<int>(l) >= static_cast<int>(prev));
        prev = l;
    }
}

TEST_CASE("score_series skips the first two days and matches score_days") {
    ScenarioSpec spec;
    spec.days = 120;
    const auto s = generate(spec);
    const MpiConfig cfg;
    const auto scored = score_series(s, cfg);
    REQUIRE(scored.size() == 118);
    CHECK(scored.front().date == s.records[2].date);
    const auto irr = irr_variability(s);
    const auto th = resolve_thresholds(cfg, irr);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const auto t = compute_triggers(s.records[i + 2], irr[i], th);
        CHECK(scored[i].score == compute_mpi(t, cfg.weights));
        CHECK(scored[i].label == label_risk(scored[i].score, cfg.band_edges));
    }
}

TEST_CASE("absolute irradiance cut takes precedence") {
    MpiConfig cfg;
    cfg.thresholds.irr_var_absolute = 12.5;
    const std::vector<double> hist{1, 2, 3};
    CHECK(resolve_thresholds(cfg, hist).irr_var == 12.5);
}

TEST_CASE("config validation") {
    MpiConfig c;
    c.weights = {0.5, 0.5, 0.1, 0, 0};
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.band_edges = {0.7, 0.6};
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.thresholds.irr_var_percentile = 100;
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.weights = {1.2, -0.2, 0, 0, 0};
    CHECK_THROWS_AS(c.check(), Error);
}

TEST_CASE("scores csv round trip") {
    ScenarioSpec spec;
    spec.days = 60;
    const auto scored = score_series(generate(spec), MpiConfig{});
    const auto back = parse_scores_csv(scores_csv(scored));
    REQUIRE(back.size() == scored.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].date == scored[i].date);
        CHECK(back[i].score == scored[i].score);
        CHECK(back[i].label == scored[i].label);
    }
}
