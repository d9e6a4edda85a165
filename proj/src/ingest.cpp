#include "mpirisk/ingest.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/text.hpp"

#include <algorithm>
#include <cmath>

namespace mpirisk {

std::optional<Date> EnvSeries::first_date() const {
    if (records.empty()) return std::nullopt;
    return records.front().date;
}

std::optional<Date> EnvSeries::last_date() const {
    if (records.empty()) return std::nullopt;
    return records.back().date;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::warn: return "warn";
        case Verdict::fail: return "fail";
    }
    return "unknown";
}

namespace {

double parse_cell(std::string_view cell, std::size_t line, std::string_view field) {
    if (cell.empty()) return kMissing;
    double v = 0.0;
    if (!parse_double(cell, v)) {
        throw ParseError(ErrorCode::row, line,
                         "cannot parse " + std::string(field) + " value '" + std::string(cell) + "'");
    }
    return v;
}

}  // namespace

EnvSeries parse_env_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front() != kEnvCsvHeader) {
        throw Error(ErrorCode::schema,
                    "header must be exactly '" + std::string(kEnvCsvHeader) + "'");
    }

    EnvSeries series;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = lines[i];
        const std::size_t lineno = i + 1;
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 6) {
            throw ParseError(ErrorCode::row, lineno,
                             "expected 6 cells, found " + std::to_string(cells.size()));
        }
        EnvRecord r;
        try {
            r.date = Date::parse_iso(cells[0]);
        } catch (const Error& e) {
            throw ParseError(ErrorCode::row, lineno, e.what());
        }
        r.aod = parse_cell(cells[1], lineno, "aod");
        r.temperature = parse_cell(cells[2], lineno, "temperature");
        r.humidity = parse_cell(cells[3], lineno, "humidity");
        r.wind_speed = parse_cell(cells[4], lineno, "wind_speed");
        r.solar_irradiance = parse_cell(cells[5], lineno, "solar_irradiance");
        series.records.push_back(r);
    }

    std::stable_sort(series.records.begin(), series.records.end(),
                     [](const EnvRecord& a, const EnvRecord& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.records.size(); ++i) {
        if (series.records[i].date == series.records[i - 1].date) {
            throw Error(ErrorCode::duplicate, "duplicate date " + series.records[i].date.iso());
        }
    }
    return series;
}

std::string serialize_env_csv(const EnvSeries& series) {
    std::string out(kEnvCsvHeader);
    out += '\n';
    for (const auto& r : series.records) {
        out += r.date.iso();
        for (double v : {r.aod, r.temperature, r.humidity, r.wind_speed, r.solar_irradiance}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

ValidationReport validate(const EnvSeries& series) {
    ValidationReport report;
    report.row_count = series.records.size();

    for (std::size_t i = 0; i < series.records.size(); ++i) {
        const auto& r = series.records[i];
        if (i > 0) {
            for (Date d = series.records[i - 1].date + 1; d < r.date; d = d + 1) {
                report.gap_dates.push_back(d);
            }
        }
        auto check = [&](const char* field, double v, double lo, double hi) {
            if (std::isnan(v)) {
                report.missing.push_back({r.date, field});
            } else if (!(v >= lo && v <= hi)) {
                report.out_of_range.push_back({r.date, field, v});
            }
        };
        // Infinite values fail every bound, including temperature's.
        constexpr double big = std::numeric_limits<double>::max();
        check("aod", r.aod, 0.0, big);
        check("temperature", r.temperature, -big, big);
        check("humidity", r.humidity, 0.0, 100.0);
        check("wind_speed", r.wind_speed, 0.0, big);
        check("solar_irradiance", r.solar_irradiance, 0.0, big);
    }

    if (!report.out_of_range.empty()) {
        report.verdict = Verdict::fail;
    } else if (report.row_count == 0 || !report.gap_dates.empty() || !report.missing.empty()) {
        report.verdict = Verdict::warn;
    }
    return report;
}

void require_valid(const EnvSeries& series, std::string_view consumer) {
    const auto report = validate(series);
    if (report.verdict == Verdict::fail) {
        const auto& first = report.out_of_range.front();
        throw Error(ErrorCode::validation,
                    std::string(consumer) + ": series failed validation (" +
                        std::to_string(report.out_of_range.size()) + " out-of-range values, first " +
                        first.field + "=" + format_double(first.value) + " on " +
                        first.date.iso() + ")");
    }
}

EnvSeries forward_fill(const EnvSeries& series) {
    EnvSeries out;
    out.location = series.location;
    for (const auto& r : series.records) {
        if (!out.records.empty()) {
            const EnvRecord prev = out.records.back();
            for (Date d = prev.date + 1; d < r.date; d = d + 1) {
                EnvRecord fill = prev;
                fill.date = d;
                out.records.push_back(fill);
            }
        }
        out.records.push_back(r);
    }
    return out;
}

EnvSeries merge_aod(const EnvSeries& base, const EnvSeries& aod_source) {
    if (base.records.size() != aod_source.records.size()) {
        throw Error(ErrorCode::precondition,
                    "AOD merge: date sets differ (" + std::to_string(base.records.size()) + " vs " +
                        std::to_string(aod_source.records.size()) + " records)");
    }
    EnvSeries out = base;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        if (out.records[i].date != aod_source.records[i].date) {
            throw Error(ErrorCode::precondition,
                        "AOD merge: date mismatch at " + out.records[i].date.iso() + " vs " +
                            aod_source.records[i].date.iso());
        }
        out.records[i].aod = aod_source.records[i].aod;
    }
    return out;
}

}  // namespace mpirisk
