#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mpirisk {

/// Calendar day without a time zone, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);

    /// Accepts YYYY-MM-DD. Throws Error(row) on anything else.
    static Date parse_iso(std::string_view text);
    /// Accepts YYYYMMDD (POWER response keys).
    static Date parse_compact(std::string_view text);

    std::string iso() const;
    std::string compact() const;

    constexpr std::int32_t days() const { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;
    /// 1-based day of year.
    unsigned day_of_year() const;

    constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
    constexpr Date operator-(std::int32_t n) const { return Date(days_ - n); }
    constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::year_month_day ymd() const;

    std::int32_t days_ = 0;
};

}  // namespace mpirisk
