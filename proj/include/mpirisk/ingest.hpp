#pragma once

#include "mpirisk/date.hpp"

#include <chrono>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpirisk {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One day of the six observed variables. A NaN field means "not observed"
/// (POWER never supplies AOD, for instance).
struct EnvRecord {
    Date date;
    double aod = 0.0;               // dimensionless
    double temperature = 0.0;       // degC at 2 m
    double humidity = 0.0;          // percent
    double wind_speed = 0.0;        // m/s at 10 m
    double solar_irradiance = 0.0;  // W/m^2, all-sky surface shortwave

    bool operator==(const EnvRecord&) const = default;
};

struct GeoPoint {
    double latitude = 0.0;
    double longitude = 0.0;
};

/// Records strictly increasing by date. Gaps are allowed and surface in validate().
struct EnvSeries {
    std::vector<EnvRecord> records;
    GeoPoint location;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::optional<Date> first_date() const;
    std::optional<Date> last_date() const;
};

enum class Verdict { pass, warn, fail };
const char* to_string(Verdict v);

struct OutOfRange {
    Date date;
    std::string field;
    double value;
};

struct MissingValue {
    Date date;
    std::string field;
};

struct ValidationReport {
    std::size_t row_count = 0;
    std::vector<Date> gap_dates;
    std::vector<OutOfRange> out_of_range;
    std::vector<MissingValue> missing;
    Verdict verdict = Verdict::pass;
};

inline constexpr std::string_view kEnvCsvHeader =
    "date,aod,temperature,humidity,wind_speed,solar_irradiance";

/// Parses the six-column daily CSV. Empty cells are read as missing (NaN).
/// Rows are returned sorted by date; duplicate dates are rejected.
EnvSeries parse_env_csv(std::string_view text);

/// Inverse of parse_env_csv; missing values become empty cells.
std::string serialize_env_csv(const EnvSeries& series);

/// Never throws. fail iff any out_of_range entry exists; warn on gaps,
/// missing values or an empty series.
ValidationReport validate(const EnvSeries& series);

/// Throws Error(validation) when validate() fails. Called by every consumer
/// of an EnvSeries.
void require_valid(const EnvSeries& series, std::string_view consumer);

/// Inserts every missing calendar day, copying the previous day's values.
EnvSeries forward_fill(const EnvSeries& series);

/// Copies AOD from `aod_source` onto `base`, keyed by date. Both series must
/// cover exactly the same dates.
EnvSeries merge_aod(const EnvSeries& base, const EnvSeries& aod_source);

// ---------------------------------------------------------------- POWER client

inline constexpr std::string_view kPowerBaseUrl = "https://power.larc.nasa.gov";
inline constexpr std::string_view kPowerPath = "/api/temporal/daily/point";
inline constexpr std::string_view kPowerParameters = "T2M,RH2M,WS10M,ALLSKY_SFC_SW_DWN";
inline constexpr double kPowerFillValue = -999.0;

struct PowerOptions {
    std::string base_url = std::string(kPowerBaseUrl);
    /// Requests are split into chunks of at most this many days and issued concurrently.
    int chunk_days = 366;
    int max_attempts = 3;
    std::chrono::milliseconds timeout{30000};
};

/// Request path + query for one POWER call.
std::string power_request_target(GeoPoint where, Date start, Date end);

/// Decodes a POWER daily JSON payload. Days carrying the fill value in any
/// parameter are omitted, so they appear as gaps; AOD is set to missing.
EnvSeries parse_power_json(std::string_view payload, GeoPoint where);

/// Fetches [start, end] from the POWER daily point API.
/// Throws Error(precondition) when end < start, Error(transport) on network
/// failure (retryable) and Error(data) on an unusable payload.
EnvSeries fetch_power(GeoPoint where, Date start, Date end, const PowerOptions& options = {});

}  // namespace mpirisk
