#pragma once

#include "mpirisk/gbdt.hpp"
#include "mpirisk/ingest.hpp"
#include "mpirisk/rng.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testing {

inline mpirisk::EnvRecord record(mpirisk::Date d, double aod, double t, double h, double w, double irr) {
    return {d, aod, t, h, w, irr};
}

/// Contiguous series with mild deterministic variation.
inline mpirisk::EnvSeries simple_series(int days, mpirisk::Date start = mpirisk::Date::from_ymd(2021, 3, 1)) {
    mpirisk::EnvSeries s;
    for (int i = 0; i < days; ++i) {
        s.records.push_back(record(start + i, 0.4 + 0.01 * (i % 7), 28.0 + 0.3 * (i % 11), 55.0 + (i % 13),
                                   4.0 + 0.2 * (i % 5), 220.0 + 3.0 * (i % 9)));
    }
    return s;
}

/// Random tree with integer covers; children always follow their parent.
inline void grow(mpirisk::Tree& t, std::size_t node, int depth, int max_depth, int n_features,
                 mpirisk::SequentialRng& rng) {
    if (depth == max_depth || (depth > 0 && rng.uniform() < 0.25)) {
        t.nodes[node].value = rng.normal();
        t.nodes[node].cover = static_cast<double>(1 + rng.below(20));
        return;
    }
    t.nodes[node].feature = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_features)));
    t.nodes[node].threshold = rng.uniform();
    const auto left = t.nodes.size();
    t.nodes.emplace_back();
    t.nodes.emplace_back();
    t.nodes[node].left = static_cast<int>(left);
    t.nodes[node].right = static_cast<int>(left + 1);
    grow(t, left, depth + 1, max_depth, n_features, rng);
    grow(t, left + 1, depth + 1, max_depth, n_features, rng);
    t.nodes[node].cover = t.nodes[left].cover + t.nodes[left + 1].cover;
}

/// `used_features` of the `n_features` columns appear in splits; the rest are dummies.
inline mpirisk::TreeEnsemble random_ensemble(std::uint64_t seed, int n_features, int used_features,
                                             int n_trees, int max_depth, int n_classes = 1) {
    mpirisk::SequentialRng rng(seed, 99);
    mpirisk::TreeEnsemble m;
    m.n_classes = std::max(n_classes, 2);
    for (int j = 0; j < n_features; ++j) m.feature_names.push_back("f" + std::to_string(j));
    m.base_score.assign(static_cast<std::size_t>(m.n_classes), 0.0);
    for (auto& b : m.base_score) b = rng.normal();
    for (int r = 0; r < n_trees; ++r) {
        std::vector<mpirisk::Tree> round;
        for (int k = 0; k < m.n_classes; ++k) {
            mpirisk::Tree t;
            t.nodes.emplace_back();
            grow(t, 0, 0, max_depth, used_features, rng);
            round.push_back(std::move(t));
        }
        m.rounds.push_back(std::move(round));
    }
    return m;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "mpirisk-XXXXXX").string();
        path = ::mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testing
