#pragma once

#include "mpirisk/date.hpp"
#include "mpirisk/ingest.hpp"

#include <cstdint>

namespace mpirisk {

/// value(day) = mean + amplitude * sin(2*pi*doy/365.25 + phase) + sigma * N(0,1)
struct VariableBaseline {
    double mean = 0.0;
    double amplitude = 0.0;
    double sigma = 0.0;
    double phase = 0.0;  // radians
};

/// Parameters for a Duqm-like synthetic climate. The defaults make every
/// MPI trigger fire on a non-trivial share of days.
struct ScenarioSpec {
    std::uint64_t seed = 42;
    int days = 1826;
    Date start = Date::from_ymd(2020, 1, 1);
    GeoPoint location{19.6, 57.7};

    VariableBaseline aod{0.55, 0.22, 0.14, -1.45};
    VariableBaseline temperature{29.5, 5.5, 1.4, -1.75};
    VariableBaseline humidity{62.0, 9.0, 7.0, -2.4};
    VariableBaseline wind_speed{5.0, 1.6, 1.1, -1.6};
    VariableBaseline solar_irradiance{245.0, 45.0, 14.0, -1.45};

    /// Dust storm onsets per year. Each onset lasts 1 to 3 days.
    double storm_rate = 6.0;
    /// Additive AOD during storm days. Irradiance is multiplied by exp(-boost).
    double storm_aod_boost = 0.6;

    /// Throws Error(precondition) when days < 1, any sigma < 0 or storm_rate < 0.
    void check() const;
};

/// Deterministic function of `spec`; output satisfies every EnvRecord invariant.
EnvSeries generate(const ScenarioSpec& spec);

}  // namespace mpirisk
