#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <map>

#include "accdet/data/io.hpp"
#include "accdet/data/pipeline.hpp"
#include "accdet/synth.hpp"

using namespace accdet;
using Catch::Approx;

namespace {

ScenarioConfig quiet_scenario(double days = 0.5, std::uint64_t seed = 7) {
    ScenarioConfig config;
    config.layout = make_reference_layout("site1");
    config.duration_days = days;
    config.seed = seed;
    return config;
}

std::vector<const SensorReading*> readings_of(const SynthResult& result, const std::string& sensor_id) {
    std::vector<const SensorReading*> rows;
    for (const auto& r : result.readings)
        if (r.sensor_id == sensor_id) rows.push_back(&r);
    return rows;
}

double mean_speed(const std::vector<const SensorReading*>& rows, std::int64_t from, std::int64_t to) {
    double sum = 0.0;
    int count = 0;
    for (const auto* r : rows)
        if (r->timestamp >= from && r->timestamp < to) {
            sum += r->speed;
            ++count;
        }
    REQUIRE(count > 0);
    return sum / count;
}

double min_speed(const std::vector<const SensorReading*>& rows, std::int64_t from, std::int64_t to) {
    double lo = 1e9;
    for (const auto* r : rows)
        if (r->timestamp >= from && r->timestamp < to) lo = std::min(lo, r->speed);
    return lo;
}

}  // namespace

TEST_CASE("reference layout has 16 sensors in two directions", "[synth]") {
    const auto layout = make_reference_layout("site1");
    CHECK(layout.sensor_count() == 16);
    CHECK(layout.column_count() == 96);
    int forward = 0;
    for (const auto& s : layout.sensors) forward += s.direction == "+" ? 1 : 0;
    CHECK(forward == 8);
}

TEST_CASE("feature consistency holds exactly on quiet data", "[synth]") {
    const auto result = generate(quiet_scenario());
    REQUIRE(result.readings.size() == static_cast<std::size_t>(16 * 1440));  // half a day of 30 s ticks
    for (const auto& r : result.readings) {
        REQUIRE(r.speed * r.density == Approx(r.flow).epsilon(1e-6));
        REQUIRE(r.headway * r.flow == Approx(3600.0).epsilon(1e-6));
        REQUIRE(r.occupancy >= 0.0);
        REQUIRE(r.occupancy <= 100.0);
    }
    CHECK(result.true_records.empty());
    CHECK(result.reported_records.empty());
}

TEST_CASE("quiet data round-trips through ingest and cleanse untouched", "[synth]") {
    const auto config = quiet_scenario(0.25, 9);
    const auto result = generate(config);
    const auto dir = std::filesystem::temp_directory_path();
    const auto sensor_path = (dir / "synth_sensors.csv").string();
    write_sensor_csv(sensor_path, result.readings);

    auto readings = ingest_sensor_csv(sensor_path, config.layout);
    REQUIRE(readings.size() == result.readings.size());
    ValidityConfig validity;
    const auto report = cleanse(readings, validity);
    CHECK(report.replaced_values == 0);
}

TEST_CASE("generation is deterministic per seed", "[synth]") {
    const auto a = generate(quiet_scenario(0.25, 5));
    const auto b = generate(quiet_scenario(0.25, 5));
    const auto c = generate(quiet_scenario(0.25, 6));
    REQUIRE(a.readings.size() == b.readings.size());
    bool identical = true;
    for (std::size_t i = 0; i < a.readings.size(); ++i)
        identical &= a.readings[i].flow == b.readings[i].flow && a.readings[i].density == b.readings[i].density;
    CHECK(identical);
    bool differs = false;
    for (std::size_t i = 0; i < a.readings.size(); ++i) differs |= a.readings[i].flow != c.readings[i].flow;
    CHECK(differs);
}

TEST_CASE("a severe crash is sensor-exclusive", "[synth]") {
    auto config = quiet_scenario(0.5, 11);
    config.noise_scale = 0.01;
    CrashEvent crash;
    crash.true_time = config.start_timestamp + 5 * 3600;  // 05:00, flat traffic
    crash.sensor_index = 3;                               // direction "+", milepost 2.4
    crash.severity = 1.0;
    crash.duration_minutes = 60.0;
    config.crashes = {crash};
    const auto result = generate(config);

    const std::int64_t pre_from = crash.true_time - 30 * 60;
    const std::int64_t post_to = crash.true_time + 60 * 60;

    // Affected upstream sensor: speed collapses below half its pre-crash mean.
    const auto hit = readings_of(result, config.layout.sensors[3].id);
    const double pre_mean = mean_speed(hit, pre_from, crash.true_time);
    CHECK(min_speed(hit, crash.true_time, post_to) < 0.5 * pre_mean);

    // Farthest opposite-direction sensor stays within 10% of its own mean.
    const auto far_opposite = readings_of(result, config.layout.sensors[15].id);
    const double far_pre = mean_speed(far_opposite, pre_from, crash.true_time);
    CHECK(min_speed(far_opposite, crash.true_time, post_to) > 0.9 * far_pre);

    // Upstream neighbor reacts later than the crash sensor (shockwave delay)
    // but still drops well below baseline.
    const auto upstream = readings_of(result, config.layout.sensors[2].id);  // 0.8 mi behind
    const double up_pre = mean_speed(upstream, pre_from, crash.true_time);
    CHECK(min_speed(upstream, crash.true_time, post_to) < 0.7 * up_pre);
    const std::int64_t delay = static_cast<std::int64_t>(0.8 / 12.0 * 3600.0);  // 4 minutes
    CHECK(min_speed(upstream, crash.true_time, crash.true_time + delay / 2) > 0.8 * up_pre);
}

TEST_CASE("a jam moves every sensor together", "[synth]") {
    auto config = quiet_scenario(1.0, 13);
    JamEvent jam;
    jam.start = config.start_timestamp + 13 * 3600;
    jam.duration_minutes = 60.0;
    jam.intensity = 1.0;
    config.jams = {jam};
    const auto result = generate(config);

    const std::int64_t mid = jam.start + 30 * 60;
    for (const auto& sensor : config.layout.sensors) {
        const auto rows = readings_of(result, sensor.id);
        std::vector<double> occupancies;
        for (const auto* r : rows) occupancies.push_back(r->occupancy);
        std::nth_element(occupancies.begin(), occupancies.begin() + static_cast<std::ptrdiff_t>(occupancies.size() / 2),
                         occupancies.end());
        const double median = occupancies[occupancies.size() / 2];
        double mid_occ = 0.0;
        for (const auto* r : rows)
            if (r->timestamp == mid) mid_occ = r->occupancy;
        REQUIRE(mid_occ > median);  // simultaneously elevated at every sensor
    }
}

TEST_CASE("report jitter", "[synth]") {
    std::vector<CrashRecord> records;
    for (int i = 0; i < 50; ++i) records.push_back({100000 + 1000 * i, "site1", true});

    SECTION("zero shift is the identity") {
        const auto reported = jitter_reports(records, 0, 3);
        for (std::size_t i = 0; i < records.size(); ++i) CHECK(reported[i].timestamp == records[i].timestamp);
    }

    SECTION("shifts stay inside the bound and are deterministic") {
        const auto a = jitter_reports(records, 600, 3);
        const auto b = jitter_reports(records, 600, 3);
        bool any_shift = false;
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(std::llabs(a[i].timestamp - records[i].timestamp) <= 600);
            CHECK(a[i].timestamp == b[i].timestamp);
            any_shift |= a[i].timestamp != records[i].timestamp;
        }
        CHECK(any_shift);
    }
}

TEST_CASE("overlapping crashes on one sensor are rejected", "[synth]") {
    auto config = quiet_scenario(0.5, 15);
    CrashEvent a, b;
    a.true_time = config.start_timestamp + 4 * 3600;
    a.sensor_index = 2;
    a.duration_minutes = 60.0;
    b.true_time = a.true_time + 30 * 60;  // overlaps a
    b.sensor_index = 2;
    b.duration_minutes = 60.0;
    config.crashes = {a, b};
    CHECK_THROWS_WITH(generate(config), Catch::Matchers::ContainsSubstring("overlapping"));

    // Same times on different sensors are fine.
    config.crashes[1].sensor_index = 9;
    CHECK_NOTHROW(generate(config));
}

TEST_CASE("default scenario places the requested crashes", "[synth]") {
    const auto config = make_default_scenario(make_reference_layout("site1"), 3.0, 5, 21);
    CHECK(config.crashes.size() == 5);
    for (const auto& c : config.crashes) {
        CHECK(c.true_time >= config.start_timestamp);
        CHECK(c.true_time < config.start_timestamp + config.duration_seconds());
        CHECK(c.severity >= 0.5);
        CHECK(c.duration_minutes >= 30.0);
    }
    // Deterministic given the seed.
    const auto again = make_default_scenario(make_reference_layout("site1"), 3.0, 5, 21);
    for (std::size_t i = 0; i < config.crashes.size(); ++i) {
        CHECK(config.crashes[i].true_time == again.crashes[i].true_time);
        CHECK(config.crashes[i].sensor_index == again.crashes[i].sensor_index);
    }
    const auto ground = generate(config).ground_truth;
    CHECK(ground.at("crashes").size() == 5);
}
