#pragma once
// Domain types for loop-detector data preparation.
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "accdet/common.hpp"

namespace accdet {

constexpr int kFeaturesPerSensor = 6;
constexpr std::int64_t kRawIntervalSeconds = 30;

// Feature column order within a sensor block.
enum Feature : int { kOccupancy = 0, kFlow, kHeadway, kDensity, kSpeed, kCapacity };

inline const std::array<const char*, kFeaturesPerSensor>& feature_names() {
    static const std::array<const char*, kFeaturesPerSensor> names = {"occupancy", "flow",  "headway",
                                                                      "density",   "speed", "capacity"};
    return names;
}

struct SensorReading {
    std::int64_t timestamp = 0;  // epoch seconds, on the 30 s grid
    std::string sensor_id;
    double occupancy = 0.0;  // percent
    double flow = 0.0;       // vehicles/hour
    double headway = 0.0;    // seconds
    double density = 0.0;    // vehicles/mile
    double speed = 0.0;      // miles/hour
    double capacity = 0.0;   // vehicles/hour, may be negative

    double feature(int f) const {
        switch (f) {
            case kOccupancy: return occupancy;
            case kFlow: return flow;
            case kHeadway: return headway;
            case kDensity: return density;
            case kSpeed: return speed;
            case kCapacity: return capacity;
        }
        fail("SensorReading: bad feature index ", f);
    }
};

struct SensorInfo {
    std::string id;
    std::string direction;  // "+" or "-"
    int lane = 1;
    double milepost = 0.0;  // miles
};

struct SiteLayout {
    std::string site_id;
    std::vector<SensorInfo> sensors;  // column order of the feature matrix

    Index sensor_count() const { return static_cast<Index>(sensors.size()); }
    Index column_count() const { return sensor_count() * kFeaturesPerSensor; }

    Index sensor_index(std::string_view id) const {
        for (std::size_t i = 0; i < sensors.size(); ++i)
            if (sensors[i].id == id) return static_cast<Index>(i);
        return -1;
    }

    // Mileposts must be strictly increasing within each direction.
    void validate() const {
        require(!site_id.empty(), "layout: missing site_id");
        require(!sensors.empty(), "layout: no sensors");
        for (std::size_t i = 0; i < sensors.size(); ++i) {
            for (std::size_t j = i + 1; j < sensors.size(); ++j) {
                require(sensors[i].id != sensors[j].id, "layout: duplicate sensor id '", sensors[i].id, "'");
                if (sensors[i].direction == sensors[j].direction)
                    require(sensors[i].milepost < sensors[j].milepost, "layout: mileposts not strictly increasing in direction ",
                            sensors[i].direction, " (", sensors[i].id, " vs ", sensors[j].id, ")");
            }
        }
    }
};

struct CrashRecord {
    std::int64_t timestamp = 0;  // epoch seconds
    std::string site_id;
    bool on_target_highway = true;
};

struct FeatureRange {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return std::isfinite(v) && v >= lo && v <= hi; }
};

struct ValidityConfig {
    std::array<FeatureRange, kFeaturesPerSensor> ranges = {{
        {0.0, 100.0},      // occupancy %
        {0.0, 3000.0},     // flow veh/h
        {0.0, 3600.0},     // headway s
        {0.0, 250.0},      // density veh/mi
        {0.0, 120.0},      // speed mph
        {-3000.0, 3000.0}  // capacity veh/h
    }};
    // A sensor invalid for longer than this is flagged in the run report.
    std::int64_t dead_sensor_horizon_seconds = 3600;
};

// Fixed-interval matrix view of the site: T rows, one column per
// (sensor, feature) in layout order then feature order.
struct AggregatedSeries {
    double dai_minutes = 0.0;
    std::int64_t start_timestamp = 0;
    std::vector<std::int64_t> interval_starts;
    Matrix values;  // T x (sensors * 6)

    Index rows() const { return values.rows(); }
    std::int64_t interval_seconds() const { return static_cast<std::int64_t>(dai_minutes * 60.0); }
};

struct WindowSample {
    Matrix values;                    // TSL x (sensors*6), row 0 = most recent interval
    int label = 0;                    // 1 = crash in the anchor interval
    std::int64_t anchor_end = 0;      // end timestamp of the most recent interval
    Index anchor_index = 0;           // row index of the anchor interval in the series
};

struct NormalizationStats {
    Vector mean;
    Vector std;  // floored at epsilon so constant columns map to zero
};

struct FoldSplit {
    int k = 0;
    std::vector<std::vector<Index>> test_indices;  // per fold, sorted

    std::vector<Index> train_indices(int fold, Index total) const {
        std::vector<bool> is_test(static_cast<std::size_t>(total), false);
        for (Index i : test_indices[static_cast<std::size_t>(fold)]) is_test[static_cast<std::size_t>(i)] = true;
        std::vector<Index> train;
        for (Index i = 0; i < total; ++i)
            if (!is_test[static_cast<std::size_t>(i)]) train.push_back(i);
        return train;
    }
};

}  // namespace accdet
