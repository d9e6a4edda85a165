// Serial reference vs OpenMP kernels: split search and global SHAP importance.

#include "mpirisk/explain.hpp"
#include "mpirisk/gbdt.hpp"
#include "mpirisk/rng.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>

using namespace mpirisk;

namespace {

struct SplitFixture {
    std::vector<std::vector<double>> columns;
    std::vector<std::vector<std::uint32_t>> sorted;
    std::vector<double> grad, hess;
    std::vector<int> features;
    std::vector<SplitInput> inputs;

    SplitFixture(std::size_t rows, int n_features) {
        SequentialRng rng(11, 0);
        grad.resize(rows);
        hess.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            grad[i] = rng.normal();
            hess[i] = 0.1 + rng.uniform();
        }
        columns.resize(static_cast<std::size_t>(n_features));
        sorted.resize(columns.size());
        for (int f = 0; f < n_features; ++f) {
            auto& col = columns[static_cast<std::size_t>(f)];
            for (std::size_t i = 0; i < rows; ++i) col.push_back(rng.uniform());
            auto& idx = sorted[static_cast<std::size_t>(f)];
            idx.resize(rows);
            std::iota(idx.begin(), idx.end(), 0u);
            std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return col[a] < col[b]; });
            features.push_back(f);
        }
        for (std::size_t f = 0; f < columns.size(); ++f) inputs.push_back({columns[f], sorted[f]});
    }

    SplitContext ctx() const { return {grad, hess, 1.0, 1.0}; }
};

void BM_SplitSerial(benchmark::State& state) {
    SplitFixture fx(static_cast<std::size_t>(state.range(0)), 14);
    for (auto _ : state) benchmark::DoNotOptimize(find_best_split_serial(fx.features, fx.inputs, fx.ctx()));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 14);
}

void BM_SplitParallel(benchmark::State& state) {
    SplitFixture fx(static_cast<std::size_t>(state.range(0)), 14);
    for (auto _ : state) benchmark::DoNotOptimize(find_best_split_parallel(fx.features, fx.inputs, fx.ctx()));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 14);
}

struct ShapFixture {
    FeatureMatrix X;
    TreeEnsemble model;

    explicit ShapFixture(std::size_t rows) {
        SequentialRng rng(5, 1);
        for (int j = 0; j < 10; ++j) X.feature_names.push_back("f" + std::to_string(j));
        std::vector<int> y;
        for (std::size_t i = 0; i < rows; ++i) {
            X.dates.push_back(Date(static_cast<std::int32_t>(i)));
            double s = 0.0;
            for (int j = 0; j < 10; ++j) {
                const double v = rng.uniform();
                X.values.push_back(v);
                if (j < 3) s += v;
            }
            y.push_back(s < 1.2 ? 0 : (s < 1.8 ? 1 : 2));
        }
        TrainParams p;
        p.n_rounds = 50;
        p.max_depth = 4;
        model = train(X, y, p);
    }
};

void BM_ImportanceSerial(benchmark::State& state) {
    ShapFixture fx(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(global_importance_serial(fx.model, fx.X));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ImportanceParallel(benchmark::State& state) {
    ShapFixture fx(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(global_importance(fx.model, fx.X));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_SplitSerial)->Arg(2000)->Arg(20000);
BENCHMARK(BM_SplitParallel)->Arg(2000)->Arg(20000);
BENCHMARK(BM_ImportanceSerial)->Arg(500)->Arg(2000);
BENCHMARK(BM_ImportanceParallel)->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
