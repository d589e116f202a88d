#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "accdet/data/io.hpp"
#include "accdet/data/pipeline.hpp"

using namespace accdet;
using Catch::Approx;

namespace {

SiteLayout two_sensor_layout() {
    SiteLayout layout;
    layout.site_id = "site1";
    layout.sensors = {{"A", "+", 1, 0.0}, {"B", "+", 1, 0.8}};
    layout.validate();
    return layout;
}

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

SensorReading reading(std::int64_t ts, std::string id, double speed, double flow = 1200.0) {
    SensorReading r;
    r.timestamp = ts;
    r.sensor_id = std::move(id);
    r.occupancy = 10.0;
    r.flow = flow;
    r.headway = 3.0;
    r.density = 20.0;
    r.speed = speed;
    r.capacity = 2200.0 - flow;
    return r;
}

}  // namespace

TEST_CASE("sensor csv ingest", "[pipeline]") {
    const auto layout = two_sensor_layout();

    SECTION("empty file with header parses to no readings") {
        const auto path = write_temp("acc_empty.csv", std::string(kSensorCsvHeader) + "\n");
        CHECK(ingest_sensor_csv(path, layout).empty());
    }

    SECTION("one valid row round-trips exactly") {
        const auto path = write_temp("acc_one.csv", std::string(kSensorCsvHeader) +
                                                        "\n60,A,12.5,1500,2.4,25,60,700\n");
        const auto rows = ingest_sensor_csv(path, layout);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].timestamp == 60);
        CHECK(rows[0].sensor_id == "A");
        CHECK(rows[0].occupancy == 12.5);
        CHECK(rows[0].flow == 1500.0);
        CHECK(rows[0].headway == 2.4);
        CHECK(rows[0].density == 25.0);
        CHECK(rows[0].speed == 60.0);
        CHECK(rows[0].capacity == 700.0);
    }

    SECTION("out-of-range values pass ingest (cleanse handles them)") {
        const auto path = write_temp("acc_neg.csv", std::string(kSensorCsvHeader) +
                                                        "\n60,A,12.5,1500,2.4,25,-3,700\n");
        const auto rows = ingest_sensor_csv(path, layout);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].speed == -3.0);
    }

    SECTION("malformed rows report the line number") {
        const auto path = write_temp("acc_bad.csv", std::string(kSensorCsvHeader) +
                                                        "\n60,A,1,2,3,4,5,6\n90,A,xx,2,3,4,5,6\n");
        CHECK_THROWS_WITH(ingest_sensor_csv(path, layout), Catch::Matchers::ContainsSubstring(":3:"));
    }

    SECTION("unknown sensors are rejected") {
        const auto path = write_temp("acc_unknown.csv", std::string(kSensorCsvHeader) +
                                                            "\n60,Z,1,2,3,4,5,6\n");
        CHECK_THROWS_WITH(ingest_sensor_csv(path, layout), Catch::Matchers::ContainsSubstring("unknown sensor"));
    }

    SECTION("readings come back sorted by sensor then time") {
        const auto path = write_temp("acc_sort.csv", std::string(kSensorCsvHeader) +
                                                         "\n90,B,1,2,3,4,5,6\n60,B,1,2,3,4,5,6\n60,A,1,2,3,4,5,6\n");
        const auto rows = ingest_sensor_csv(path, layout);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].sensor_id == "A");
        CHECK(rows[1].timestamp == 60);
        CHECK(rows[2].timestamp == 90);
    }
}

TEST_CASE("crash ingest and offsite discard", "[pipeline]") {
    const auto layout = two_sensor_layout();
    const auto path = write_temp("acc_crash.csv", std::string(kCrashCsvHeader) +
                                                      "\n100,site1,1\n200,site2,1\n300,site1,0\n");
    const auto records = ingest_crash_csv(path);
    REQUIRE(records.size() == 3);
    const auto kept = discard_offsite_crashes(records, layout);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].timestamp == 100);
}

TEST_CASE("layout file round trip", "[pipeline]") {
    const auto layout = two_sensor_layout();
    const auto path = (std::filesystem::temp_directory_path() / "acc_layout.cfg").string();
    save_layout(path, layout);
    const auto loaded = load_layout(path);
    CHECK(loaded.site_id == "site1");
    REQUIRE(loaded.sensor_count() == 2);
    CHECK(loaded.sensors[1].milepost == Approx(0.8));

    SiteLayout bad = layout;
    bad.sensors[1].milepost = -1.0;  // violates strictly-increasing mileposts
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("cleanse interpolates invalid measurements", "[pipeline]") {
    ValidityConfig validity;

    SECTION("bad speed between valid neighbors is linearly interpolated") {
        std::vector<SensorReading> rows = {reading(0, "A", 60.0), reading(30, "A", -3.0), reading(60, "A", 62.0)};
        const auto report = cleanse(rows, validity);
        CHECK(rows[1].speed == Approx(61.0));
        CHECK(report.replaced_values == 1);
    }

    SECTION("all-valid series is unchanged") {
        std::vector<SensorReading> rows = {reading(0, "A", 60.0), reading(30, "A", 61.0)};
        const auto before = rows;
        const auto report = cleanse(rows, validity);
        CHECK(report.replaced_values == 0);
        CHECK(rows[0].speed == before[0].speed);
        CHECK(rows[1].speed == before[1].speed);
    }

    SECTION("occupancy above 100 percent is replaced") {
        std::vector<SensorReading> rows = {reading(0, "A", 60.0), reading(30, "A", 60.0), reading(60, "A", 60.0)};
        rows[1].occupancy = 250.0;
        cleanse(rows, validity);
        CHECK(rows[1].occupancy == Approx(10.0));
    }

    SECTION("leading and trailing gaps take the nearest valid value") {
        std::vector<SensorReading> rows = {reading(0, "A", -1.0), reading(30, "A", 55.0), reading(60, "A", 130.0)};
        cleanse(rows, validity);
        CHECK(rows[0].speed == Approx(55.0));
        CHECK(rows[2].speed == Approx(55.0));
    }

    SECTION("sensor with zero valid readings is an error") {
        std::vector<SensorReading> rows = {reading(0, "A", -1.0), reading(30, "A", -2.0)};
        CHECK_THROWS_WITH(cleanse(rows, validity), Catch::Matchers::ContainsSubstring("no valid speed"));
    }

    SECTION("long dead stretches are flagged") {
        std::vector<SensorReading> rows;
        for (int i = 0; i < 400; ++i) {
            rows.push_back(reading(30 * i, "A", i >= 100 && i < 300 ? -5.0 : 60.0));
        }
        const auto report = cleanse(rows, validity);
        REQUIRE_FALSE(report.dead_sensor_flags.empty());
        CHECK(report.dead_sensor_flags[0].find("speed") != std::string::npos);
    }
}

TEST_CASE("aggregate means the raw grid", "[pipeline]") {
    const auto layout = two_sensor_layout();

    std::vector<SensorReading> rows;
    for (int i = 0; i < 4; ++i) {
        rows.push_back(reading(30 * i, "A", 60.0 + 4.0 * (i % 2)));  // 60, 64, 60, 64
        rows.push_back(reading(30 * i, "B", 50.0));
    }

    SECTION("DAI 0.5 min is the identity on the raw grid") {
        const auto series = aggregate(rows, layout, 0.5);
        REQUIRE(series.rows() == 4);
        CHECK(series.values(0, 0 * kFeaturesPerSensor + kSpeed) == Approx(60.0));
        CHECK(series.values(1, 0 * kFeaturesPerSensor + kSpeed) == Approx(64.0));
    }

    SECTION("two 30 s speeds 60 and 64 average to 62 at DAI 1") {
        const auto series = aggregate(rows, layout, 1.0);
        REQUIRE(series.rows() == 2);
        CHECK(series.values(0, kSpeed) == Approx(62.0));
        CHECK(series.values(0, kFeaturesPerSensor + kSpeed) == Approx(50.0));
    }

    SECTION("row count is floor(duration / DAI)") {
        std::vector<SensorReading> long_rows;
        for (int i = 0; i < 36; ++i) {  // 18 minutes of 30 s data
            long_rows.push_back(reading(30 * i, "A", 60.0));
            long_rows.push_back(reading(30 * i, "B", 50.0));
        }
        CHECK(aggregate(long_rows, layout, 3.0).rows() == 6);
    }

    SECTION("disallowed DAI is rejected") {
        CHECK_THROWS_AS(aggregate(rows, layout, 3.3), Error);
    }

    SECTION("aggregate commutes with per-feature affine maps") {
        auto mapped = rows;
        for (auto& r : mapped) r.speed = 2.5 * r.speed - 7.0;
        const auto base = aggregate(rows, layout, 1.0);
        const auto transformed = aggregate(mapped, layout, 1.0);
        for (Index t = 0; t < base.rows(); ++t)
            for (Index s = 0; s < 2; ++s)
                CHECK(transformed.values(t, s * kFeaturesPerSensor + kSpeed) ==
                      Approx(2.5 * base.values(t, s * kFeaturesPerSensor + kSpeed) - 7.0));
    }
}

TEST_CASE("z-normalization", "[pipeline]") {
    SECTION("hand case: column {1,3} maps to {-1,+1}") {
        Matrix x(2, 1);
        x << 1.0, 3.0;
        const auto stats = fit_normalizer(x);
        const Matrix z = apply_normalizer(stats, x);
        CHECK(z(0, 0) == Approx(-1.0));
        CHECK(z(1, 0) == Approx(1.0));
    }

    SECTION("constant column maps to zeros") {
        Matrix x = Matrix::Constant(5, 2, 3.25);
        const Matrix z = apply_normalizer(fit_normalizer(x), x);
        CHECK(z.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("training columns have mean 0 and variance 1 within 1e-9") {
        Rng rng(33);
        Matrix x(400, 6);
        for (Index r = 0; r < x.rows(); ++r)
            for (Index c = 0; c < x.cols(); ++c)
                x(r, c) = rng.normal() * (1.0 + static_cast<double>(c)) + 5.0 * static_cast<double>(c);
        const Matrix z = apply_normalizer(fit_normalizer(x), x);
        for (Index c = 0; c < z.cols(); ++c) {
            CHECK(std::abs(z.col(c).mean()) <= 1e-9);
            CHECK(std::abs(z.col(c).array().square().mean() - 1.0) <= 1e-9);
        }
    }

    SECTION("apply then unapply is the identity within 1e-12") {
        Rng rng(34);
        Matrix x(50, 3);
        for (Index r = 0; r < x.rows(); ++r)
            for (Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(-5.0, 5.0);
        const auto stats = fit_normalizer(x);
        const Matrix round = unapply_normalizer(stats, apply_normalizer(stats, x));
        CHECK((round - x).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("window generation", "[pipeline]") {
    // 16-sensor layout gives the reference 96-column frame.
    SiteLayout layout;
    layout.site_id = "site1";
    for (int i = 0; i < 16; ++i) {
        SensorInfo s;
        s.id = "S" + std::to_string(i);
        s.direction = i < 8 ? "+" : "-";
        s.lane = i % 2 + 1;
        s.milepost = 0.8 * static_cast<double>(i % 8);
        layout.sensors.push_back(s);
    }
    layout.validate();

    std::vector<SensorReading> rows;
    for (int t = 0; t < 72; ++t)  // 36 minutes
        for (int s = 0; s < 16; ++s) {
            auto r = reading(30 * t, layout.sensors[static_cast<std::size_t>(s)].id, 60.0);
            r.flow = 1000.0 + t;  // make rows distinguishable
            rows.push_back(r);
        }
    const auto series = aggregate(rows, layout, 3.0);  // 12 intervals
    REQUIRE(series.rows() == 12);

    SECTION("TSL 6 on a 96-column series gives samples of shape (6,96)") {
        const auto labels = window_labels(series, 6, {});
        const auto windows = make_windows(series, series.values, 6, labels);
        REQUIRE(windows.size() == 7);
        CHECK(windows[0].values.rows() == 6);
        CHECK(windows[0].values.cols() == 96);
        for (const auto& w : windows) CHECK(w.label == 0);
    }

    SECTION("rows are most-recent-first") {
        const auto labels = window_labels(series, 6, {});
        const auto windows = make_windows(series, series.values, 6, labels);
        const auto& w = windows.back();  // anchored at interval 11
        CHECK(w.values(0, kFlow) == Approx(series.values(11, kFlow)));
        CHECK(w.values(5, kFlow) == Approx(series.values(6, kFlow)));
        CHECK(w.anchor_end == series.interval_starts[11] + 180);
    }

    SECTION("a crash labels exactly the window anchored at its interval") {
        CrashRecord crash;
        crash.timestamp = series.interval_starts[10] + 30;  // inside interval 10
        crash.site_id = "site1";
        const auto labels = window_labels(series, 6, {crash});
        const auto windows = make_windows(series, series.values, 6, labels);
        int positives = 0;
        for (const auto& w : windows) {
            if (w.label == 1) {
                ++positives;
                CHECK(w.anchor_index == 10);
            }
        }
        CHECK(positives == 1);
    }

    SECTION("two crashes in one interval dedup to one positive window") {
        CrashRecord a, b;
        a.timestamp = series.interval_starts[9] + 10;
        b.timestamp = series.interval_starts[9] + 100;
        const auto labels = window_labels(series, 6, {a, b});
        int positives = 0;
        for (int v : labels) positives += v;
        CHECK(positives == 1);
    }

    SECTION("series shorter than TSL errors") {
        CHECK_THROWS_AS(window_labels(series, 13, {}), Error);
    }

    SECTION("flatten and unflatten are lossless") {
        const auto labels = window_labels(series, 6, {});
        const auto windows = make_windows(series, series.values, 6, labels);
        const Vector flat = flatten_window(windows[3].values);
        REQUIRE(flat.size() == 6 * 96);
        const Matrix back = unflatten_window(flat, 6, 96);
        CHECK((back - windows[3].values).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("stratified k-fold split", "[pipeline]") {
    std::vector<int> labels(100, 0);
    for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(7 * i)] = 1;  // 10 crash windows

    KfoldOptions opts;
    opts.k = 5;
    opts.seed = 99;
    const auto split1 = kfold_split(labels, opts);

    SECTION("each fold holds exactly two crash windows") {
        for (const auto& fold : split1.test_indices) {
            int crashes = 0;
            for (Index i : fold) crashes += labels[static_cast<std::size_t>(i)];
            CHECK(crashes == 2);
        }
    }

    SECTION("folds partition the indices") {
        std::set<Index> seen;
        std::size_t total = 0;
        for (const auto& fold : split1.test_indices) {
            total += fold.size();
            seen.insert(fold.begin(), fold.end());
        }
        CHECK(total == labels.size());
        CHECK(seen.size() == labels.size());
        const auto train = split1.train_indices(2, static_cast<Index>(labels.size()));
        CHECK(train.size() + split1.test_indices[2].size() == labels.size());
    }

    SECTION("same seed reproduces the split; different seed changes it") {
        const auto split2 = kfold_split(labels, opts);
        CHECK(split1.test_indices == split2.test_indices);
        KfoldOptions other = opts;
        other.seed = 100;
        CHECK(kfold_split(labels, other).test_indices != split1.test_indices);
    }

    SECTION("warns when folds outnumber crash windows") {
        std::vector<int> few(20, 0);
        few[3] = 1;
        std::vector<std::string> warnings;
        kfold_split(few, opts, &warnings);
        CHECK_FALSE(warnings.empty());
    }

    SECTION("fewer windows than folds errors") {
        std::vector<int> tiny(3, 0);
        CHECK_THROWS_AS(kfold_split(tiny, opts), Error);
    }
}
