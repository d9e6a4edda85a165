#include "mpirisk/synth.hpp"

#include "mpirisk/error.hpp"
#include "mpirisk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mpirisk {

namespace {

enum Stream : std::uint64_t {
    kAod = 1,
    kTemperature,
    kHumidity,
    kWind,
    kIrradiance,
    kStormOnset,
    kStormLength,
};

double seasonal(const VariableBaseline& b, Date d) {
    const double angle = 2.0 * std::numbers::pi * d.day_of_year() / 365.25 + b.phase;
    return b.mean + b.amplitude * std::sin(angle);
}

}  // namespace

void ScenarioSpec::check() const {
    if (days < 1) throw Error(ErrorCode::precondition, "synth: days must be >= 1");
    for (const auto* b : {&aod, &temperature, &humidity, &wind_speed, &solar_irradiance}) {
        if (!(b->sigma >= 0.0)) throw Error(ErrorCode::precondition, "synth: sigma must be >= 0");
    }
    if (!(storm_rate >= 0.0)) throw Error(ErrorCode::precondition, "synth: storm_rate must be >= 0");
}

EnvSeries generate(const ScenarioSpec& spec) {
    spec.check();
    const auto n = static_cast<std::size_t>(spec.days);

    // Storm days: each day independently starts a storm with probability
    // rate/365.25 (a Bernoulli-thinned Poisson process).
    std::vector<bool> storm(n, false);
    const CounterRng onset(spec.seed, kStormOnset);
    const CounterRng length(spec.seed, kStormLength);
    const double p_onset = std::min(1.0, spec.storm_rate / 365.25);
    for (std::size_t i = 0; i < n; ++i) {
        if (onset.uniform(i) < p_onset) {
            const std::size_t len = 1 + length.at(i) % 3;
            for (std::size_t k = i; k < std::min(n, i + len); ++k) storm[k] = true;
        }
    }

    const CounterRng noise_aod(spec.seed, kAod);
    const CounterRng noise_temp(spec.seed, kTemperature);
    const CounterRng noise_hum(spec.seed, kHumidity);
    const CounterRng noise_wind(spec.seed, kWind);
    const CounterRng noise_irr(spec.seed, kIrradiance);

    EnvSeries series;
    series.location = spec.location;
    series.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Date d = spec.start + static_cast<std::int32_t>(i);
        EnvRecord r;
        r.date = d;
        r.aod = seasonal(spec.aod, d) + spec.aod.sigma * noise_aod.normal(i);
        r.temperature = seasonal(spec.temperature, d) + spec.temperature.sigma * noise_temp.normal(i);
        r.humidity = seasonal(spec.humidity, d) + spec.humidity.sigma * noise_hum.normal(i);
        r.wind_speed = seasonal(spec.wind_speed, d) + spec.wind_speed.sigma * noise_wind.normal(i);
        r.solar_irradiance =
            seasonal(spec.solar_irradiance, d) + spec.solar_irradiance.sigma * noise_irr.normal(i);
        if (storm[i]) {
            r.aod += spec.storm_aod_boost;
            r.solar_irradiance *= std::exp(-spec.storm_aod_boost);
        }
        r.aod = std::max(0.0, r.aod);
        r.humidity = std::clamp(r.humidity, 0.0, 100.0);
        r.wind_speed = std::max(0.0, r.wind_speed);
        r.solar_irradiance = std::max(0.0, r.solar_irradiance);
        series.records.push_back(r);
    }
    return series;
}

}  // namespace mpirisk
