#pragma once
// Synthetic freeway loop-detector data: diurnal flow with rush-hour peaks,
// AR(1) noise, site-wide traffic jams, and crashes with sensor-exclusive
// spatial signatures. flow and density are the primitive quantities; speed
// and headway are derived afterwards (speed = flow/density, headway =
// 3600/flow), so those relations hold exactly on every emitted reading.
//
// Crash anatomy: the queue grows upstream of the crash sensor with an onset
// delay of distance/shockwave speed; upstream sensors lose flow and gain
// density (speed collapses), downstream sensors starve mildly, the opposite
// direction sees only a small rubbernecking dip.
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "accdet/data/types.hpp"
#include "accdet/rng.hpp"

namespace accdet {

struct CrashEvent {
    std::int64_t true_time = 0;       // epoch seconds
    Index sensor_index = 0;           // affected sensor (crash location)
    double severity = 1.0;            // (0, 1]
    double duration_minutes = 60.0;   // disturbance length
    std::int64_t reported_time = 0;   // true_time + jitter, set by jitter_reports
};

struct JamEvent {
    std::int64_t start = 0;
    double duration_minutes = 60.0;
    double intensity = 1.0;  // (0, 1]
};

struct DiurnalProfile {
    double base_flow = 400.0;    // veh/h off-peak
    double peak_flow = 1200.0;   // added at rush hour
    double morning_peak_hour = 7.5;
    double evening_peak_hour = 16.5;
    double peak_width_hours = 1.25;
    double free_speed = 65.0;  // mph
};

struct ScenarioConfig {
    SiteLayout layout;
    double duration_days = 1.0;
    std::int64_t start_timestamp = 1704067200;  // 2024-01-01 00:00:00 UTC
    std::uint64_t seed = 0;
    DiurnalProfile diurnal;
    double noise_scale = 0.015;  // stationary sd of the AR(1) flow noise
    std::vector<JamEvent> jams;
    std::vector<CrashEvent> crashes;
    std::int64_t report_max_shift_seconds = 300;
    double shockwave_mph = 12.0;       // upstream queue growth speed
    double downstream_wave_mph = 35.0;
    double crash_length_scale_miles = 1.5;

    std::int64_t duration_seconds() const { return static_cast<std::int64_t>(duration_days * 86400.0); }
};

struct SynthResult {
    std::vector<SensorReading> readings;       // timestamp-major, layout order
    std::vector<CrashRecord> true_records;
    std::vector<CrashRecord> reported_records;
    nlohmann::json ground_truth;
};

namespace detail {

// 0 outside [0,1]; fast rise to ~1 then quadratic recovery.
inline double crash_envelope(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double rise = std::min(u / 0.08, 1.0);
    const double decay = (1.0 - u) * (1.0 - u);
    return rise * decay;
}

// Smooth 0->1->0 plateau with sine-squared ramps.
inline double jam_envelope(std::int64_t t, std::int64_t start, std::int64_t duration, std::int64_t ramp = 480) {
    if (t < start || t > start + duration) return 0.0;
    const std::int64_t into = t - start;
    const std::int64_t left = start + duration - t;
    const std::int64_t edge = std::min(into, left);
    if (edge >= ramp) return 1.0;
    const double s = std::sin(0.5 * std::numbers::pi * static_cast<double>(edge) / static_cast<double>(ramp));
    return s * s;
}

}  // namespace detail

// Reference site: 16 sensors, 8 per direction at 0.8 mile spacing.
inline SiteLayout make_reference_layout(const std::string& site_id, Index sensors_per_direction = 8,
                                        double spacing_miles = 0.8) {
    SiteLayout layout;
    layout.site_id = site_id;
    for (int dir = 0; dir < 2; ++dir) {
        for (Index i = 0; i < sensors_per_direction; ++i) {
            SensorInfo s;
            char buf[32];
            std::snprintf(buf, sizeof buf, "S%02d", static_cast<int>(dir * sensors_per_direction + i + 1));
            s.id = buf;
            s.direction = dir == 0 ? "+" : "-";
            s.lane = static_cast<int>(i % 2) + 1;
            s.milepost = spacing_miles * static_cast<double>(i);
            layout.sensors.push_back(s);
        }
    }
    layout.validate();
    return layout;
}

inline std::vector<CrashRecord> jitter_reports(const std::vector<CrashRecord>& records, std::int64_t max_shift,
                                               std::uint64_t seed) {
    require(max_shift >= 0, "jitter_reports: max_shift must be >= 0");
    Rng rng(derive_seed(seed, "report-jitter"));
    std::vector<CrashRecord> reported = records;
    for (auto& r : reported) {
        const double shift = rng.uniform(-static_cast<double>(max_shift), static_cast<double>(max_shift));
        r.timestamp += static_cast<std::int64_t>(std::llround(shift));
    }
    return reported;
}

inline SynthResult generate(const ScenarioConfig& config) {
    config.layout.validate();
    const std::int64_t t_end = config.start_timestamp + config.duration_seconds();
    require(config.duration_seconds() >= kRawIntervalSeconds, "generate: duration too short");
    for (const auto& c : config.crashes) {
        require(c.severity > 0.0 && c.severity <= 1.0, "generate: crash severity must be in (0,1]");
        require(c.sensor_index >= 0 && c.sensor_index < config.layout.sensor_count(),
                "generate: crash sensor index ", c.sensor_index, " out of range");
        require(c.true_time >= config.start_timestamp && c.true_time < t_end, "generate: crash at ", c.true_time,
                " outside coverage");
    }
    for (const auto& j : config.jams)
        require(j.start >= config.start_timestamp && j.start < t_end, "generate: jam outside coverage");
    for (std::size_t a = 0; a < config.crashes.size(); ++a) {
        for (std::size_t b = a + 1; b < config.crashes.size(); ++b) {
            const auto& x = config.crashes[a];
            const auto& y = config.crashes[b];
            if (x.sensor_index != y.sensor_index) continue;
            const std::int64_t x_end = x.true_time + static_cast<std::int64_t>(x.duration_minutes * 60.0);
            const std::int64_t y_end = y.true_time + static_cast<std::int64_t>(y.duration_minutes * 60.0);
            require(x_end <= y.true_time || y_end <= x.true_time, "generate: overlapping crash events on sensor ",
                    x.sensor_index);
        }
    }

    const Index n_sensors = config.layout.sensor_count();
    const std::int64_t ticks = config.duration_seconds() / kRawIntervalSeconds;

    Rng rng(derive_seed(config.seed, "synth-noise"));
    std::vector<double> flow_noise(static_cast<std::size_t>(n_sensors), 0.0);
    std::vector<double> speed_noise(static_cast<std::size_t>(n_sensors), 0.0);
    const double phi = 0.95;
    const double innovation = std::sqrt(1.0 - phi * phi);

    SynthResult out;
    out.readings.reserve(static_cast<std::size_t>(ticks * n_sensors));

    for (std::int64_t k = 0; k < ticks; ++k) {
        const std::int64_t ts = config.start_timestamp + k * kRawIntervalSeconds;
        const double hour = static_cast<double>((ts - config.start_timestamp) % 86400) / 3600.0;
        const auto& d = config.diurnal;
        auto bump = [&](double peak_hour) {
            const double dh = hour - peak_hour;
            return std::exp(-dh * dh / (2.0 * d.peak_width_hours * d.peak_width_hours));
        };
        const double profile = d.base_flow + d.peak_flow * (bump(d.morning_peak_hour) + bump(d.evening_peak_hour));

        double jam_factor = 0.0;
        for (const auto& j : config.jams)
            jam_factor = std::max(jam_factor, j.intensity * detail::jam_envelope(
                                                                ts, j.start,
                                                                static_cast<std::int64_t>(j.duration_minutes * 60.0)));

        for (Index s = 0; s < n_sensors; ++s) {
            const auto si = static_cast<std::size_t>(s);
            const auto& sensor = config.layout.sensors[si];
            flow_noise[si] = phi * flow_noise[si] + config.noise_scale * innovation * rng.normal();
            speed_noise[si] = phi * speed_noise[si] + 0.5 * config.noise_scale * innovation * rng.normal();

            double flow = std::max(30.0, profile * (1.0 + flow_noise[si]));
            const double v_free = std::clamp(d.free_speed * (1.0 + speed_noise[si]), 40.0, 90.0);
            double density = flow / v_free;

            // Site-wide congestion: all sensors together.
            density *= 1.0 + 1.5 * jam_factor;
            flow *= 1.0 - 0.15 * jam_factor;

            // Sensor-exclusive crash effects.
            for (const auto& c : config.crashes) {
                const auto& crash_sensor = config.layout.sensors[static_cast<std::size_t>(c.sensor_index)];
                const double dist = std::abs(sensor.milepost - crash_sensor.milepost);
                const double dur = c.duration_minutes * 60.0;
                if (sensor.direction == crash_sensor.direction) {
                    const bool upstream = crash_sensor.direction == "+" ? sensor.milepost <= crash_sensor.milepost
                                                                        : sensor.milepost >= crash_sensor.milepost;
                    if (upstream) {
                        const double onset = static_cast<double>(c.true_time) + dist / config.shockwave_mph * 3600.0;
                        const double u = (static_cast<double>(ts) - onset) / dur;
                        const double e = c.severity * std::exp(-dist / config.crash_length_scale_miles) *
                                         detail::crash_envelope(u);
                        density *= 1.0 + 2.5 * e;
                        flow *= 1.0 - 0.7 * e;
                    } else {
                        const double onset =
                            static_cast<double>(c.true_time) + dist / config.downstream_wave_mph * 3600.0;
                        const double u = (static_cast<double>(ts) - onset) / dur;
                        const double e = c.severity * std::exp(-dist / (2.0 * config.crash_length_scale_miles)) *
                                         detail::crash_envelope(u);
                        flow *= 1.0 - 0.35 * e;
                        density *= 1.0 - 0.35 * e;  // starvation: speed holds
                    }
                } else {
                    const double u = (static_cast<double>(ts) - static_cast<double>(c.true_time)) / dur;
                    const double e = c.severity * std::exp(-dist / (2.0 * config.crash_length_scale_miles)) *
                                     detail::crash_envelope(u);
                    density *= 1.0 + 0.06 * e;  // rubbernecking
                }
            }

            flow = std::min(flow, 2900.0);
            density = std::clamp(density, 0.2, 245.0);

            SensorReading r;
            r.timestamp = ts;
            r.sensor_id = sensor.id;
            r.flow = flow;
            r.density = density;
            r.speed = flow / density;
            r.headway = 3600.0 / flow;
            r.occupancy = std::min(100.0, 0.35 * density);
            r.capacity = 2200.0 - flow;
            out.readings.push_back(std::move(r));
        }
    }

    for (const auto& c : config.crashes) {
        CrashRecord rec;
        rec.timestamp = c.true_time;
        rec.site_id = config.layout.site_id;
        rec.on_target_highway = true;
        out.true_records.push_back(rec);
    }
    out.reported_records = jitter_reports(out.true_records, config.report_max_shift_seconds, config.seed);

    nlohmann::json events = nlohmann::json::array();
    for (std::size_t i = 0; i < config.crashes.size(); ++i) {
        const auto& c = config.crashes[i];
        events.push_back({{"true_time", c.true_time},
                          {"reported_time", out.reported_records[i].timestamp},
                          {"sensor_index", c.sensor_index},
                          {"sensor_id", config.layout.sensors[static_cast<std::size_t>(c.sensor_index)].id},
                          {"severity", c.severity},
                          {"duration_minutes", c.duration_minutes}});
    }
    nlohmann::json jams = nlohmann::json::array();
    for (const auto& j : config.jams)
        jams.push_back({{"start", j.start}, {"duration_minutes", j.duration_minutes}, {"intensity", j.intensity}});
    out.ground_truth = {{"site_id", config.layout.site_id},
                        {"seed", config.seed},
                        {"start_timestamp", config.start_timestamp},
                        {"duration_days", config.duration_days},
                        {"crashes", events},
                        {"jams", jams}};
    return out;
}

// Randomized scenario used by the CLI and the end-to-end experiments: one
// afternoon jam most days, crashes at daytime hours spread across sensors
// with non-overlapping disturbances.
inline ScenarioConfig make_default_scenario(SiteLayout layout, double days, Index crash_count, std::uint64_t seed) {
    ScenarioConfig config;
    config.layout = std::move(layout);
    config.duration_days = days;
    config.seed = seed;

    Rng rng(derive_seed(seed, "scenario"));
    const auto full_days = static_cast<std::int64_t>(days);
    for (std::int64_t day = 0; day < full_days; ++day) {
        if (rng.uniform() < 0.3) continue;  // some days have no extra jam
        JamEvent jam;
        jam.start = config.start_timestamp + day * 86400 + static_cast<std::int64_t>(3600.0 * rng.uniform(16.0, 17.0));
        jam.duration_minutes = rng.uniform(40.0, 80.0);
        jam.intensity = rng.uniform(0.6, 1.0);
        config.jams.push_back(jam);
    }

    const std::int64_t margin = 2 * 3600;
    const std::int64_t span = config.duration_seconds() - 2 * margin;
    require(span > 0, "make_default_scenario: duration too short for crash placement");
    std::vector<std::int64_t> times;
    int attempts = 0;
    while (static_cast<Index>(times.size()) < crash_count) {
        require(++attempts < 100000, "make_default_scenario: cannot place ", crash_count, " non-overlapping crashes");
        const std::int64_t day = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(1, full_days))));
        const double hour = rng.uniform(6.0, 20.0);
        std::int64_t t = config.start_timestamp + day * 86400 + static_cast<std::int64_t>(hour * 3600.0);
        t = (t / kRawIntervalSeconds) * kRawIntervalSeconds;
        if (t < config.start_timestamp + margin || t >= config.start_timestamp + config.duration_seconds() - margin)
            continue;
        bool clash = false;
        for (std::int64_t other : times) clash |= std::llabs(other - t) < 2 * 3600;
        if (clash) continue;
        times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    for (std::int64_t t : times) {
        CrashEvent crash;
        crash.true_time = t;
        crash.sensor_index = static_cast<Index>(rng.below(static_cast<std::uint64_t>(config.layout.sensor_count())));
        crash.severity = rng.uniform(0.5, 1.0);
        crash.duration_minutes = 30.0 + 60.0 * crash.severity;
        config.crashes.push_back(crash);
    }
    return config;
}

}  // namespace accdet
