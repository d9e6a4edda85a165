#include "mpirisk/evaluate.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>

namespace mpirisk {

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < k; ++j) s += at(c, j);
    return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += at(i, c);
    return s;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t k) {
    if (y_true.empty()) throw Error(ErrorCode::precondition, "confusion: empty input");
    if (y_true.size() != y_pred.size()) {
        throw Error(ErrorCode::precondition, "confusion: y_true and y_pred differ in length");
    }
    ConfusionMatrix cm{k, std::vector<std::size_t>(k * k, 0)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_pred[i] < 0 || static_cast<std::size_t>(y_true[i]) >= k ||
            static_cast<std::size_t>(y_pred[i]) >= k) {
            throw Error(ErrorCode::precondition, "confusion: label outside [0, k)");
        }
        ++cm.counts[static_cast<std::size_t>(y_true[i]) * k + static_cast<std::size_t>(y_pred[i])];
    }
    return cm;
}

ClassificationReport report(const ConfusionMatrix& cm) {
    ClassificationReport r;
    r.total = cm.total();
    std::size_t trace = 0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        ClassMetrics m;
        const auto tp = cm.at(c, c);
        trace += tp;
        const auto predicted = cm.col_sum(c);
        m.support = cm.row_sum(c);
        if (predicted > 0) {
            m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
        } else {
            m.undefined = true;
        }
        if (m.support > 0) {
            m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
        } else {
            m.undefined = true;
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.undefined = true;
        }
        r.per_class.push_back(m);
    }
    r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(r.total);

    const double k = static_cast<double>(cm.k);
    for (const auto& m : r.per_class) {
        r.macro.precision += m.precision / k;
        r.macro.recall += m.recall / k;
        r.macro.f1 += m.f1 / k;
        if (r.total > 0) {
            const double w = static_cast<double>(m.support) / static_cast<double>(r.total);
            r.weighted.precision += w * m.precision;
            r.weighted.recall += w * m.recall;
            r.weighted.f1 += w * m.f1;
        }
    }
    return r;
}

RegressionMetrics regression(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw Error(ErrorCode::precondition, "regression: y_true and y_pred differ in length");
    }
    if (y_true.empty()) throw Error(ErrorCode::precondition, "regression: empty input");
    const auto n = static_cast<double>(y_true.size());
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double e = y_true[i] - y_pred[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        mean += y_true[i];
    }
    mean /= n;
    double ss_tot = 0.0;
    for (double v : y_true) ss_tot += (v - mean) * (v - mean);

    RegressionMetrics m;
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    if (ss_tot > 0.0) m.r2 = 1.0 - sq_sum / ss_tot;
    return m;
}

std::string report_json(const ClassificationReport& r, const ConfusionMatrix& cm,
                        std::span<const std::string> class_names) {
    nlohmann::ordered_json j;
    auto classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        classes.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"support", m.support},
                           {"undefined", m.undefined}});
    }
    j["classes"] = classes;
    j["accuracy"] = r.accuracy;
    j["macro_avg"] = {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}};
    j["weighted_avg"] = {
        {"precision", r.weighted.precision}, {"recall", r.weighted.recall}, {"f1", r.weighted.f1}};
    j["total"] = r.total;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < cm.k; ++i) {
        std::vector<std::size_t> row(cm.counts.begin() + static_cast<std::ptrdiff_t>(i * cm.k),
                                     cm.counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * cm.k));
        rows.push_back(row);
    }
    j["confusion"] = rows;
    return j.dump(2) + "\n";
}

std::string report_table(const ClassificationReport& r, std::span<const std::string> class_names) {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-18s%10s%10s%10s%10s\n", "", "precision", "recall", "f1-score",
                  "support");
    out += buf;
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        std::snprintf(buf, sizeof buf, "%-18s%10.2f%10.2f%10.2f%10zu%s\n", name.c_str(), m.precision,
                      m.recall, m.f1, m.support, m.undefined ? " *" : "");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-18s%10s%10s%10.2f%10zu\n", "accuracy", "", "", r.accuracy, r.total);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-18s%10.2f%10.2f%10.2f%10zu\n", "macro avg", r.macro.precision,
                  r.macro.recall, r.macro.f1, r.total);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-18s%10.2f%10.2f%10.2f%10zu\n", "weighted avg",
                  r.weighted.precision, r.weighted.recall, r.weighted.f1, r.total);
    out += buf;
    return out;
}

std::string regression_json(const RegressionMetrics& m, std::size_t n) {
    nlohmann::ordered_json j;
    j["mae"] = m.mae;
    j["rmse"] = m.rmse;
    j["r2"] = m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json(nullptr);
    j["r2_defined"] = m.r2.has_value();
    j["n"] = n;
    return j.dump(2) + "\n";
}

Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorCode::precondition, "test fraction must lie in (0, 1)");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    Split out;
    for (auto& [cls, idx] : by_class) {
        SequentialRng rng(seed, static_cast<std::uint64_t>(cls));
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
        out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace mpirisk
