#include "mpirisk/date.hpp"
#include "mpirisk/error.hpp"
#include "mpirisk/log.hpp"
#include "mpirisk/text.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace mpirisk {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::schema: return "schema";
        case ErrorCode::row: return "row";
        case ErrorCode::duplicate: return "duplicate";
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::transport: return "transport";
        case ErrorCode::data: return "data";
        case ErrorCode::degenerate: return "degenerate";
        case ErrorCode::dimension: return "dimension";
        case ErrorCode::validation: return "validation";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

// ---------------------------------------------------------------- Date

namespace {

int parse_digits(std::string_view s) {
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return -1;
        v = v * 10 + (c - '0');
    }
    return v;
}

Date checked_ymd(int y, int m, int d, std::string_view original) {
    if (y < 0 || m < 1 || d < 1) {
        throw Error(ErrorCode::row, "invalid date '" + std::string(original) + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw Error(ErrorCode::row, "invalid date '" + std::string(original) + "'");
    return Date(static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count()));
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    return checked_ymd(year, static_cast<int>(month), static_cast<int>(day), "from_ymd");
}

Date Date::parse_iso(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw Error(ErrorCode::row, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    return checked_ymd(parse_digits(text.substr(0, 4)), parse_digits(text.substr(5, 2)),
                       parse_digits(text.substr(8, 2)), text);
}

Date Date::parse_compact(std::string_view text) {
    if (text.size() != 8) {
        throw Error(ErrorCode::row, "expected YYYYMMDD, got '" + std::string(text) + "'");
    }
    return checked_ymd(parse_digits(text.substr(0, 4)), parse_digits(text.substr(4, 2)),
                       parse_digits(text.substr(6, 2)), text);
}

std::chrono::year_month_day Date::ymd() const {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
}

int Date::year() const { return static_cast<int>(ymd().year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd().month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd().day()); }

unsigned Date::day_of_year() const {
    const Date jan1 = from_ymd(year(), 1, 1);
    return static_cast<unsigned>(*this - jan1) + 1;
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
    return buf;
}

std::string Date::compact() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d%02u%02u", year(), month(), day());
    return buf;
}

// ---------------------------------------------------------------- text

std::string format_double(double value) {
    if (std::isnan(value)) return {};
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

bool parse_double(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        auto line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = pos + 1;
    }
    return lines;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    static std::atomic<unsigned> counter{0};
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot write " + path);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::io, "write failed for " + path);
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::io, "cannot rename into " + path);
    }
}

// ---------------------------------------------------------------- log

namespace log {

namespace {

Level from_env() {
    const char* v = std::getenv("MPI_LOG");
    if (v == nullptr) return Level::info;
    const std::string_view s(v);
    if (s == "error") return Level::error;
    if (s == "debug") return Level::debug;
    return Level::info;
}

std::atomic<int>& level_storage() {
    static std::atomic<int> level{static_cast<int>(from_env())};
    return level;
}

}  // namespace

Level threshold() { return static_cast<Level>(level_storage().load()); }
void set_threshold(Level level) { level_storage().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
    if (static_cast<int>(level) > level_storage().load()) return;
    static std::mutex mu;
    static constexpr const char* kNames[] = {"error", "info", "debug"};
    std::lock_guard lock(mu);
    std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace log

}  // namespace mpirisk
