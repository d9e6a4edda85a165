#include "mpirisk/error.hpp"
#include "mpirisk/gbdt.hpp"
#include "mpirisk/mpi_index.hpp"
#include "mpirisk/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace mpirisk;

namespace {

// Rows of raw condition values labelled by the MPI band they imply.
struct Labelled {
    FeatureMatrix X;
    std::vector<int> y;
};

Labelled mpi_labelled(std::size_t n, std::uint64_t seed) {
    SequentialRng rng(seed, 0);
    Labelled d;
    d.X.feature_names = {"aod", "temperature", "humidity", "wind_speed", "irr_var"};
    const ResolvedThresholds th{0.9, 35.0, 70.0, 5.0, 10.0};
    const Weights w{0.35, 0.25, 0.20, 0.15, 0.05};
    for (std::size_t i = 0; i < n; ++i) {
        const EnvRecord r{Date(static_cast<std::int32_t>(i)), rng.uniform() * 1.6, 25 + rng.uniform() * 20,
                          40 + rng.uniform() * 50, rng.uniform() * 9, 200};
        const double irr = rng.uniform() * 20;
        d.X.dates.push_back(r.date);
        for (double v : {r.aod, r.temperature, r.humidity, r.wind_speed, irr}) d.X.values.push_back(v);
        d.y.push_back(static_cast<int>(label_risk(compute_mpi(compute_triggers(r, irr, th), w), BandEdges{})));
    }
    return d;
}

FeatureMatrix random_matrix(std::size_t n, std::size_t f, SequentialRng& rng, bool ties = false) {
    FeatureMatrix X;
    for (std::size_t j = 0; j < f; ++j) X.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
        X.dates.push_back(Date(static_cast<std::int32_t>(i)));
        for (std::size_t j = 0; j < f; ++j) {
            const double v = rng.normal();
            X.values.push_back(ties ? std::round(v * 2) / 2 : v);
        }
    }
    return X;
}

// Gain of every admissible split on one feature, by direct summation.
SplitCandidate oracle_split(const std::vector<double>& col, const std::vector<std::uint32_t>& rows,
                            const std::vector<double>& g, const std::vector<double>& h, double l2, double mcw) {
    std::set<double> distinct;
    for (auto r : rows) distinct.insert(col[r]);
    std::vector<double> vals(distinct.begin(), distinct.end());
    double G = 0, H = 0;
    for (auto r : rows) {
        G += g[r];
        H += h[r];
    }
    SplitCandidate best;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double t = 0.5 * (vals[i] + vals[i + 1]);
        double gl = 0, hl = 0;
        for (auto r : rows) {
            if (col[r] < t) {
                gl += g[r];
                hl += h[r];
            }
        }
        const double gr = G - gl, hr = H - hl;
        if (hl < mcw || hr < mcw) continue;
        const double gain = 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - G * G / (H + l2));
        if (gain > 1e-12 && gain > best.gain * (1 + 1e-10)) best = {gain, 0, t};
    }
    return best;
}

// Row indices reaching each node.
std::vector<std::vector<std::size_t>> route(const Tree& t, const FeatureMatrix& X) {
    std::vector<std::vector<std::size_t>> at(t.nodes.size());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        std::size_t n = 0;
        at[n].push_back(i);
        while (!t.nodes[n].is_leaf()) {
            const auto& node = t.nodes[n];
            n = static_cast<std::size_t>(X.at(i, static_cast<std::size_t>(node.feature)) < node.threshold ? node.left
                                                                                                         : node.right);
            at[n].push_back(i);
        }
    }
    return at;
}

bool same_structure(const TreeEnsemble& a, const TreeEnsemble& b, double value_tol) {
    if (a.rounds.size() != b.rounds.size()) return false;
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
        for (std::size_t c = 0; c < a.rounds[r].size(); ++c) {
            const auto& x = a.rounds[r][c].nodes;
            const auto& y = b.rounds[r][c].nodes;
            if (x.size() != y.size()) return false;
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i].feature != y[i].feature || x[i].threshold != y[i].threshold || x[i].left != y[i].left ||
                    x[i].right != y[i].right || std::abs(x[i].value - y[i].value) > value_tol) {
                    MESSAGE("round " << r << " class " << c << " node " << i << ": " << x[i].feature << "/"
                                     << y[i].feature << " " << x[i].threshold << "/" << y[i].threshold << " "
                                     << x[i].value << "/" << y[i].value);
                    return false;
                }
            }
        }
    }
    return true;
}

TreeEnsemble stump_model(double a, double b) {
    TreeEnsemble m;
    m.n_classes = 2;
    m.feature_names = {"x0", "x1"};
    m.base_score = {0.0, 0.0};
    Tree t;
    t.nodes = {{0, 0.5, 1, 2, 0.0, 100}, {-1, 0, -1, -1, a, 50}, {-1, 0, -1, -1, b, 50}};
    Tree zero;
    zero.nodes = {{-1, 0, -1, -1, 0.0, 100}};
    m.rounds = {{t, zero}};
    return m;
}

}  // namespace

TEST_CASE("learns deterministic MPI bands on 200 rows") {
    const auto d = mpi_labelled(200, 1);
    TrainParams p;
    p.n_rounds = 100;
    p.n_classes = 3;
    const auto m = train(d.X, d.y, p);
    int correct = 0;
    for (std::size_t i = 0; i < d.X.rows(); ++i) correct += predict_class(m, d.X.row(i)) == d.y[i];
    CHECK(correct / 200.0 >= 0.99);
}

TEST_CASE("training preconditions") {
    auto d = mpi_labelled(50, 2);
    std::vector<int> same(50, 1);
    CHECK_THROWS_AS(train(d.X, same, TrainParams{}), Error);
    std::vector<int> shorter(d.y.begin(), d.y.end() - 1);
    CHECK_THROWS_AS(train(d.X, shorter, TrainParams{}), Error);
    TrainParams bad;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(train(d.X, d.y, bad), Error);
    auto nan = d;
    nan.X.values[3] = std::nan("");
    CHECK_THROWS_AS(train(nan.X, nan.y, TrainParams{}), Error);
}

TEST_CASE("integer weights equal duplicated rows") {
    const auto d = mpi_labelled(150, 3);
    FeatureMatrix dup;
    dup.feature_names = d.X.feature_names;
    std::vector<int> ydup;
    for (std::size_t i = 0; i < d.X.rows(); ++i) {
        for (int k = 0; k < 2; ++k) {
            dup.dates.push_back(d.X.dates[i]);
            const auto row = d.X.row(i);
            dup.values.insert(dup.values.end(), row.begin(), row.end());
            ydup.push_back(d.y[i]);
        }
    }
    TrainParams p;
    p.n_rounds = 30;
    p.n_classes = 3;
    const std::vector<double> w2(d.X.rows(), 2.0);
    const auto weighted = train(d.X, d.y, p, w2);
    const auto duplicated = train(dup, ydup, p);
    CHECK(same_structure(weighted, duplicated, 1e-12));
    for (std::size_t r = 0; r < weighted.rounds.size(); ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            const auto& a = weighted.rounds[r][c].nodes;
            const auto& b = duplicated.rounds[r][c].nodes;
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].cover == b[i].cover);
        }
    }
}

TEST_CASE("without regularization duplicating rows leaves the trees unchanged") {
    // With l2 = 0 every gain doubles and every leaf value -G/H is unchanged.
    // Noisy labels keep node hessians away from zero so rounding stays small.
    SequentialRng rng(4, 0);
    const auto X = random_matrix(150, 4, rng);
    std::vector<int> y;
    for (std::size_t i = 0; i < X.rows(); ++i) y.push_back((X.at(i, 0) + 0.8 * rng.normal() > 0) + (X.at(i, 1) > 0.5));
    FeatureMatrix dup = X;
    std::vector<int> ydup = y;
    dup.values.insert(dup.values.end(), X.values.begin(), X.values.end());
    dup.dates.insert(dup.dates.end(), X.dates.begin(), X.dates.end());
    ydup.insert(ydup.end(), y.begin(), y.end());
    TrainParams p;
    p.n_rounds = 10;
    p.max_depth = 3;
    p.l2_leaf_reg = 0.0;
    p.min_child_weight = 0.0;
    CHECK(same_structure(train(X, y, p), train(dup, ydup, p), 1e-9));
}

TEST_CASE("margins") {
    const auto d = mpi_labelled(100, 5);
    TrainParams p;
    p.n_rounds = 12;
    p.n_classes = 3;
    const auto m = train(d.X, d.y, p);
    const auto x = d.X.row(7);
    CHECK(predict_margin(m, x, 0) == m.base_score);
    auto zero = m;
    zero.rounds.clear();
    CHECK(predict_margin(zero, x) == m.base_score);
    const auto full = predict_margin(m, x);
    const auto part = predict_margin(m, x, 5);
    for (std::size_t c = 0; c < 3; ++c) {
        double rest = 0.0;
        for (std::size_t r = 5; r < m.rounds.size(); ++r) rest += m.rounds[r][c].predict(x);
        CHECK(full[c] == doctest::Approx(part[c] + rest).epsilon(1e-14));
    }
    const auto stump = stump_model(-1.0, 3.0);
    const std::vector<double> hi{0.9, 0.0}, lo{0.1, 0.0};
    CHECK(predict_margin(stump, hi)[0] == 3.0);
    CHECK(predict_margin(stump, lo)[0] == -1.0);
    CHECK_THROWS_AS(predict_margin(stump, std::vector<double>{1.0}), Error);
}

TEST_CASE("softmax examples") {
    for (double v : softmax(std::vector<double>{2.0, 2.0, 2.0, 2.0})) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    const auto p = softmax(std::vector<double>{0.0, std::numbers::ln2});
    CHECK(p[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    const auto q = softmax(std::vector<double>{0.3 + 50, std::numbers::ln2 + 50});
    const auto r = softmax(std::vector<double>{0.3, std::numbers::ln2});
    CHECK(q[0] == doctest::Approx(r[0]).epsilon(1e-14));
    CHECK(softmax(std::vector<double>{1000.0, 0.0})[0] == 1.0);
}

TEST_CASE("predict_class examples") {
    TreeEnsemble m;
    m.n_classes = 3;
    m.feature_names = {"x"};
    const std::vector<double> x{0.0};
    m.base_score = {1, 3, 2};
    CHECK(predict_class(m, x) == 1);
    m.base_score = {2, 2, 0};
    CHECK(predict_class(m, x) == 0);
}

TEST_CASE("predict_class agrees with predict_proba") {
    const auto d = mpi_labelled(150, 6);
    TrainParams p;
    p.n_rounds = 15;
    p.n_classes = 3;
    const auto m = train(d.X, d.y, p);
    SequentialRng rng(8, 0);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> x{rng.uniform() * 1.6, 25 + rng.uniform() * 20, 40 + rng.uniform() * 50,
                                    rng.uniform() * 9, rng.uniform() * 20};
        const auto pr = predict_proba(m, x);
        CHECK(predict_class(m, x) == static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin()));
    }
}

TEST_CASE("cover conservation, midpoint thresholds and child order") {
    SequentialRng rng(9, 0);
    const auto X = random_matrix(300, 4, rng, true);
    std::vector<int> y;
    for (std::size_t i = 0; i < X.rows(); ++i) y.push_back((X.at(i, 0) + X.at(i, 2) > 0) + (X.at(i, 1) > 1));
    TrainParams p;
    p.n_rounds = 10;
    p.max_depth = 5;
    const auto m = train(X, y, p);
    for (const auto& round : m.rounds) {
        for (const auto& t : round) {
            const auto at = route(t, X);
            for (std::size_t n = 0; n < t.nodes.size(); ++n) {
                const auto& node = t.nodes[n];
                CHECK(node.cover == static_cast<double>(at[n].size()));
                if (node.is_leaf()) continue;
                CHECK(node.left > static_cast<int>(n));
                CHECK(node.right > static_cast<int>(n));
                CHECK(node.cover == t.nodes[static_cast<std::size_t>(node.left)].cover +
                                        t.nodes[static_cast<std::size_t>(node.right)].cover);
                double below = -1e300, above = 1e300;
                for (auto i : at[n]) {
                    const double v = X.at(i, static_cast<std::size_t>(node.feature));
                    if (v < node.threshold) below = std::max(below, v);
                    else above = std::min(above, v);
                }
                CHECK(node.threshold == 0.5 * (below + above));
            }
            CHECK(t.depth() <= 5);
        }
    }
}

TEST_CASE("training log-loss never increases") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto d = mpi_labelled(300, seed);
        TrainParams p;
        p.n_rounds = 80;
        p.n_classes = 3;
        TrainTrace trace;
        train(d.X, d.y, p, {}, &trace);
        REQUIRE(trace.log_loss.size() == 81);
        for (std::size_t r = 1; r < trace.log_loss.size(); ++r) CHECK(trace.log_loss[r] <= trace.log_loss[r - 1]);
    }
}

TEST_CASE("training is deterministic and serial equals parallel") {
    const auto d = mpi_labelled(250, 10);
    TrainParams p;
    p.n_rounds = 25;
    p.n_classes = 3;
    p.feature_subsample = 0.6;
    p.seed = 77;
    const auto a = model_to_json(train(d.X, d.y, p));
    CHECK(a == model_to_json(train(d.X, d.y, p)));
    p.execution = Execution::serial;
    CHECK(a == model_to_json(train(d.X, d.y, p)));
    p.seed = 78;
    CHECK(a != model_to_json(train(d.X, d.y, p)));
}

TEST_CASE("feature subsampling restricts splits to the drawn subset") {
    SequentialRng rng(12, 0);
    const auto X = random_matrix(200, 10, rng);
    std::vector<int> y;
    for (std::size_t i = 0; i < X.rows(); ++i) y.push_back(X.at(i, 3) > 0);
    TrainParams p;
    p.n_rounds = 20;
    p.feature_subsample = 0.2;
    const auto m = train(X, y, p);
    for (const auto& round : m.rounds) {
        std::set<int> used;
        for (const auto& t : round) {
            for (const auto& n : t.nodes) {
                if (!n.is_leaf()) used.insert(n.feature);
            }
        }
        CHECK(used.size() <= 2 * round.size());
    }
}

TEST_CASE("split kernel matches the brute-force oracle") {
    SequentialRng rng(21, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 5 + rng.below(80);
        const auto X = random_matrix(n, 1, rng, trial % 2 == 0);
        std::vector<double> col(X.values), g(n), h(n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = rng.normal();
            h[i] = 0.05 + rng.uniform();
        }
        std::vector<std::uint32_t> rows(n);
        for (std::uint32_t i = 0; i < n; ++i) rows[i] = i;
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return col[a] < col[b]; });
        const double l2 = trial % 3 == 0 ? 0.0 : 1.0;
        const double mcw = trial % 4 == 0 ? 2.0 : 0.0;
        const auto got = best_split_for_feature(0, {col, rows}, {g, h, l2, mcw});
        const auto want = oracle_split(col, rows, g, h, l2, mcw);
        CHECK(got.valid() == want.valid());
        if (want.valid()) {
            CHECK(got.threshold == want.threshold);
            CHECK(got.gain == doctest::Approx(want.gain).epsilon(1e-9));
        }
    }
}

TEST_CASE("serial and parallel split search are bit identical") {
    SequentialRng rng(31, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 50 + rng.below(200);
        const std::size_t f = 1 + rng.below(16);
        const auto X = random_matrix(n, f, rng, trial % 2 == 1);
        std::vector<std::vector<double>> cols(f, std::vector<double>(n));
        std::vector<std::vector<std::uint32_t>> sorted(f);
        std::vector<int> features;
        for (std::size_t j = 0; j < f; ++j) {
            for (std::size_t i = 0; i < n; ++i) cols[j][i] = X.at(i, j);
            sorted[j].resize(n);
            for (std::uint32_t i = 0; i < n; ++i) sorted[j][i] = i;
            std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](auto a, auto b) { return cols[j][a] < cols[j][b]; });
            features.push_back(static_cast<int>(j));
        }
        std::vector<double> g(n), h(n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = rng.normal();
            h[i] = rng.uniform();
        }
        std::vector<SplitInput> inputs;
        for (std::size_t j = 0; j < f; ++j) inputs.push_back({cols[j], sorted[j]});
        const SplitContext ctx{g, h, 1.0, 0.5};
        const auto a = find_best_split_serial(features, inputs, ctx);
        const auto b = find_best_split_parallel(features, inputs, ctx);
        CHECK(a.feature == b.feature);
        CHECK(a.threshold == b.threshold);
        CHECK(a.gain == b.gain);
        SplitCandidate best;
        for (std::size_t j = 0; j < f; ++j) {
            const auto c = best_split_for_feature(static_cast<int>(j), inputs[j], ctx);
            if (c.valid() && c.gain > best.gain * (1 + 1e-10)) best = c;
        }
        CHECK(a.feature == best.feature);
    }
}

TEST_CASE("model JSON round trips and rejects malformed input") {
    const auto d = mpi_labelled(80, 13);
    TrainParams p;
    p.n_rounds = 5;
    p.n_classes = 3;
    const auto m = train(d.X, d.y, p);
    const auto text = model_to_json(m);
    const auto back = model_from_json(text);
    CHECK(model_to_json(back) == text);
    CHECK(back.rounds == m.rounds);
    CHECK(back.base_score == m.base_score);
    CHECK_THROWS_AS(model_from_json("{}"), Error);
    CHECK_THROWS_AS(model_from_json(R"({"format":"other","version":1})"), Error);
    auto broken = m;
    broken.rounds[0][0].nodes[0].left = 0;
    CHECK_THROWS_AS(model_from_json(model_to_json(broken)), Error);
}

TEST_CASE("base score is the log class prior") {
    const auto d = mpi_labelled(200, 14);
    TrainParams p;
    p.n_rounds = 0;
    p.n_classes = 4;
    const auto m = train(d.X, d.y, p);
    std::array<double, 4> count{};
    for (int c : d.y) ++count[static_cast<std::size_t>(c)];
    for (std::size_t c = 0; c < 3; ++c) {
        if (count[c] > 0) CHECK(m.base_score[c] == doctest::Approx(std::log(count[c] / 200.0)).epsilon(1e-14));
    }
    CHECK(m.base_score[3] == doctest::Approx(std::log(1e-6)));
}
