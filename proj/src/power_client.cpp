#include "mpirisk/error.hpp"
#include "mpirisk/ingest.hpp"
#include "mpirisk/log.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <map>
#include <thread>

namespace mpirisk {

namespace {

using nlohmann::json;

constexpr const char* kParams[] = {"T2M", "RH2M", "WS10M", "ALLSKY_SFC_SW_DWN"};

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string fetch_chunk(const PowerOptions& options, const std::string& target) {
    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
        httplib::Client client(options.base_url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
        client.set_connection_timeout(secs);
        client.set_read_timeout(secs);
        client.set_follow_location(true);
        auto res = client.Get(target);
        if (res && res->status == 200) return res->body;
        if (res) {
            // 4xx means the request itself is wrong; retrying will not help.
            if (res->status >= 400 && res->status < 500) {
                throw Error(ErrorCode::data, "POWER returned HTTP " + std::to_string(res->status) +
                                                 ": " + res->body.substr(0, 200));
            }
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            last_error = httplib::to_string(res.error());
        }
        log::info("POWER request failed (attempt " + std::to_string(attempt) + "): " + last_error);
        if (attempt < options.max_attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
        }
    }
    throw Error(ErrorCode::transport, "POWER request failed: " + last_error);
}

}  // namespace

std::string power_request_target(GeoPoint where, Date start, Date end) {
    std::string t(kPowerPath);
    t += "?community=RE&parameters=";
    t += kPowerParameters;
    t += "&latitude=" + format_coord(where.latitude);
    t += "&longitude=" + format_coord(where.longitude);
    t += "&start=" + start.compact();
    t += "&end=" + end.compact();
    t += "&format=JSON";
    return t;
}

EnvSeries parse_power_json(std::string_view payload, GeoPoint where) {
    json doc;
    try {
        doc = json::parse(payload);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::data, std::string("POWER payload is not JSON: ") + e.what());
    }
    const auto props = doc.find("properties");
    if (props == doc.end() || !props->contains("parameter")) {
        throw Error(ErrorCode::data, "POWER payload has no properties.parameter block");
    }
    const auto& block = (*props)["parameter"];

    double fill = kPowerFillValue;
    if (auto h = doc.find("header"); h != doc.end() && h->contains("fill_value")) {
        fill = (*h)["fill_value"].get<double>();
    }

    // date -> values in kParams order
    std::map<Date, std::array<double, 4>> days;
    for (std::size_t p = 0; p < 4; ++p) {
        const auto it = block.find(kParams[p]);
        if (it == block.end() || !it->is_object()) {
            throw Error(ErrorCode::data, std::string("POWER payload lacks parameter ") + kParams[p]);
        }
        for (const auto& [key, value] : it->items()) {
            Date d;
            try {
                d = Date::parse_compact(key);
            } catch (const Error&) {
                throw Error(ErrorCode::data, "POWER payload has malformed date key '" + key + "'");
            }
            auto& row = days.try_emplace(d, std::array<double, 4>{fill, fill, fill, fill}).first->second;
            row[p] = value.is_number() ? value.get<double>() : fill;
        }
    }
    if (days.empty()) throw Error(ErrorCode::data, "POWER payload contains no days");

    EnvSeries series;
    series.location = where;
    for (const auto& [date, v] : days) {
        if (std::any_of(v.begin(), v.end(), [fill](double x) { return x == fill; })) {
            log::debug("POWER fill value on " + date.iso() + "; recorded as gap");
            continue;
        }
        EnvRecord r;
        r.date = date;
        r.aod = kMissing;
        r.temperature = v[0];
        r.humidity = v[1];
        r.wind_speed = v[2];
        // ALLSKY_SFC_SW_DWN is a daily energy total in kWh/m^2/day; convert to mean W/m^2.
        r.solar_irradiance = v[3] * 1000.0 / 24.0;
        series.records.push_back(r);
    }
    return series;
}

EnvSeries fetch_power(GeoPoint where, Date start, Date end, const PowerOptions& options) {
    if (end < start) {
        throw Error(ErrorCode::precondition,
                    "fetch_power: end " + end.iso() + " precedes start " + start.iso());
    }
    const int chunk = std::max(1, options.chunk_days);

    std::vector<std::future<EnvSeries>> pending;
    for (Date lo = start; lo <= end; lo = lo + chunk) {
        const Date hi = std::min(end, lo + (chunk - 1));
        const std::string target = power_request_target(where, lo, hi);
        pending.push_back(std::async(std::launch::async, [&options, target, where] {
            return parse_power_json(fetch_chunk(options, target), where);
        }));
    }

    EnvSeries merged;
    merged.location = where;
    for (auto& f : pending) {
        auto part = f.get();
        merged.records.insert(merged.records.end(), part.records.begin(), part.records.end());
    }
    std::sort(merged.records.begin(), merged.records.end(),
              [](const EnvRecord& a, const EnvRecord& b) { return a.date < b.date; });
    merged.records.erase(std::unique(merged.records.begin(), merged.records.end(),
                                     [](const EnvRecord& a, const EnvRecord& b) {
                                         return a.date == b.date;
                                     }),
                         merged.records.end());
    return merged;
}

}  // namespace mpirisk
