#pragma once
// Data preparation stages, in pipeline order: discard off-site crashes and
// cleanse raw readings, aggregate to a DAI grid, Z-normalize (train-fit),
// window into reverse-chronological samples, and split into stratified folds.
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "accdet/data/types.hpp"
#include "accdet/rng.hpp"

namespace accdet {

inline const std::vector<double>& allowed_dai_minutes() {
    static const std::vector<double> allowed = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    return allowed;
}

inline std::vector<CrashRecord> discard_offsite_crashes(const std::vector<CrashRecord>& records,
                                                        const SiteLayout& layout) {
    std::vector<CrashRecord> kept;
    for (const auto& r : records)
        if (r.site_id == layout.site_id && r.on_target_highway) kept.push_back(r);
    return kept;
}

struct CleanseReport {
    Index replaced_values = 0;
    std::vector<std::string> dead_sensor_flags;  // sensor/feature gaps longer than the horizon
};

// Replaces out-of-range or missing measurements by linear interpolation in
// time between the nearest valid same-sensor readings; leading/trailing gaps
// take the nearest valid value. A sensor feature with no valid reading at
// all is an error. Readings must be sorted by (sensor_id, timestamp).
inline CleanseReport cleanse(std::vector<SensorReading>& readings, const ValidityConfig& validity) {
    CleanseReport report;
    std::size_t begin = 0;
    while (begin < readings.size()) {
        std::size_t end = begin;
        while (end < readings.size() && readings[end].sensor_id == readings[begin].sensor_id) ++end;

        for (int f = 0; f < kFeaturesPerSensor; ++f) {
            const FeatureRange& range = validity.ranges[static_cast<std::size_t>(f)];
            std::vector<std::size_t> valid;
            for (std::size_t i = begin; i < end; ++i)
                if (range.contains(readings[i].feature(f))) valid.push_back(i);
            require(!valid.empty(), "cleanse: sensor '", readings[begin].sensor_id, "' has no valid ", feature_names()[f],
                    " readings");

            auto set_feature = [&](std::size_t i, double v) {
                SensorReading& r = readings[i];
                switch (f) {
                    case kOccupancy: r.occupancy = v; break;
                    case kFlow: r.flow = v; break;
                    case kHeadway: r.headway = v; break;
                    case kDensity: r.density = v; break;
                    case kSpeed: r.speed = v; break;
                    case kCapacity: r.capacity = v; break;
                }
            };

            std::size_t vi = 0;  // first valid index at or after the cursor
            for (std::size_t i = begin; i < end; ++i) {
                if (range.contains(readings[i].feature(f))) continue;
                while (vi < valid.size() && valid[vi] < i) ++vi;
                ++report.replaced_values;
                if (vi == 0) {
                    set_feature(i, readings[valid.front()].feature(f));  // leading gap
                } else if (vi == valid.size()) {
                    set_feature(i, readings[valid.back()].feature(f));  // trailing gap
                } else {
                    const std::size_t a = valid[vi - 1];
                    const std::size_t b = valid[vi];
                    const double t = static_cast<double>(readings[i].timestamp - readings[a].timestamp) /
                                     static_cast<double>(readings[b].timestamp - readings[a].timestamp);
                    set_feature(i, readings[a].feature(f) + t * (readings[b].feature(f) - readings[a].feature(f)));
                }
            }

            // Flag long dead stretches for the run report.
            std::int64_t gap_start = -1;
            for (std::size_t i = begin; i <= end; ++i) {
                const bool is_valid = i < end && std::binary_search(valid.begin(), valid.end(), i);
                if (i < end && !is_valid) {
                    if (gap_start < 0) gap_start = readings[i].timestamp;
                } else if (gap_start >= 0) {
                    const std::int64_t gap_end =
                        (i < end ? readings[i].timestamp : readings[end - 1].timestamp + kRawIntervalSeconds);
                    if (gap_end - gap_start > validity.dead_sensor_horizon_seconds) {
                        std::ostringstream os;
                        os << "sensor " << readings[begin].sensor_id << " " << feature_names()[f] << " invalid for "
                           << (gap_end - gap_start) << " s starting at " << gap_start;
                        report.dead_sensor_flags.push_back(os.str());
                    }
                    gap_start = -1;
                }
            }
        }
        begin = end;
    }
    return report;
}

// Mean-aggregates the 30 s grid into DAI-minute intervals. Every sensor must
// cover every interval (cleanse guarantees a dense grid).
inline AggregatedSeries aggregate(const std::vector<SensorReading>& readings, const SiteLayout& layout,
                                  double dai_minutes) {
    bool allowed = false;
    for (double d : allowed_dai_minutes()) allowed |= d == dai_minutes;
    require(allowed, "aggregate: DAI ", dai_minutes, " min not in the allowed set");
    const std::int64_t interval = static_cast<std::int64_t>(dai_minutes * 60.0);
    require(interval % kRawIntervalSeconds == 0, "aggregate: DAI must be a multiple of ", kRawIntervalSeconds, " s");
    require(!readings.empty(), "aggregate: no readings");

    std::int64_t t_min = readings.front().timestamp, t_max = readings.front().timestamp;
    for (const auto& r : readings) {
        t_min = std::min(t_min, r.timestamp);
        t_max = std::max(t_max, r.timestamp);
    }
    const std::int64_t duration = t_max + kRawIntervalSeconds - t_min;
    const Index t_count = static_cast<Index>(duration / interval);
    require(t_count >= 1, "aggregate: data span ", duration, " s is shorter than one interval");

    AggregatedSeries series;
    series.dai_minutes = dai_minutes;
    series.start_timestamp = t_min;
    series.interval_starts.resize(static_cast<std::size_t>(t_count));
    for (Index t = 0; t < t_count; ++t) series.interval_starts[static_cast<std::size_t>(t)] = t_min + t * interval;
    series.values = Matrix::Zero(t_count, layout.column_count());

    Matrix counts = Matrix::Zero(t_count, layout.sensor_count());
    for (const auto& r : readings) {
        const Index s = layout.sensor_index(r.sensor_id);
        require(s >= 0, "aggregate: unknown sensor '", r.sensor_id, "'");
        const Index t = static_cast<Index>((r.timestamp - t_min) / interval);
        if (t < 0 || t >= t_count) continue;  // partial trailing interval
        for (int f = 0; f < kFeaturesPerSensor; ++f)
            series.values(t, s * kFeaturesPerSensor + f) += r.feature(f);
        counts(t, s) += 1.0;
    }
    for (Index t = 0; t < t_count; ++t) {
        for (Index s = 0; s < layout.sensor_count(); ++s) {
            require(counts(t, s) > 0.0, "aggregate: sensor '", layout.sensors[static_cast<std::size_t>(s)].id,
                    "' has no readings in interval starting ", series.interval_starts[static_cast<std::size_t>(t)]);
            for (int f = 0; f < kFeaturesPerSensor; ++f)
                series.values(t, s * kFeaturesPerSensor + f) /= counts(t, s);
        }
    }
    return series;
}

constexpr double kStdFloor = 1e-8;

// Population (1/N) statistics; constant columns get the epsilon floor so the
// transform maps them to zero.
inline NormalizationStats fit_normalizer(const Matrix& train_rows) {
    require(train_rows.rows() >= 1, "fit_normalizer: no rows");
    NormalizationStats stats;
    stats.mean = train_rows.colwise().mean();
    stats.std.resize(train_rows.cols());
    for (Index c = 0; c < train_rows.cols(); ++c) {
        const double var = (train_rows.col(c).array() - stats.mean(c)).square().mean();
        stats.std(c) = std::max(std::sqrt(var), kStdFloor);
    }
    return stats;
}

inline Matrix apply_normalizer(const NormalizationStats& stats, const Matrix& rows) {
    require(rows.cols() == stats.mean.size(), "apply_normalizer: column count mismatch");
    return (rows.rowwise() - stats.mean.transpose()).array().rowwise() / stats.std.transpose().array();
}

inline Matrix unapply_normalizer(const NormalizationStats& stats, const Matrix& rows) {
    require(rows.cols() == stats.mean.size(), "unapply_normalizer: column count mismatch");
    return (rows.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() + stats.mean.transpose();
}

// Labels for every possible window anchor: 1 iff a crash timestamp falls
// inside the anchor (most recent) interval. Crashes sharing an interval
// count once.
inline std::vector<int> window_labels(const AggregatedSeries& series, Index tsl,
                                      const std::vector<CrashRecord>& crashes) {
    require(tsl >= 1, "window_labels: TSL must be >= 1");
    require(series.rows() >= tsl, "window_labels: series has ", series.rows(), " intervals, needs at least ", tsl);
    const std::int64_t interval = series.interval_seconds();
    std::set<Index> crash_intervals;
    for (const auto& c : crashes) {
        const std::int64_t offset = c.timestamp - series.start_timestamp;
        if (offset < 0) continue;
        const Index t = static_cast<Index>(offset / interval);
        if (t < series.rows()) crash_intervals.insert(t);
    }
    std::vector<int> labels(static_cast<std::size_t>(series.rows() - tsl + 1), 0);
    for (Index anchor = tsl - 1; anchor < series.rows(); ++anchor)
        if (crash_intervals.count(anchor)) labels[static_cast<std::size_t>(anchor - tsl + 1)] = 1;
    return labels;
}

// Materializes the window anchored at series row `anchor`: TSL rows stored
// most-recent-first.
inline WindowSample make_window(const AggregatedSeries& series, const Matrix& values, Index tsl, Index anchor,
                                int label) {
    require(anchor >= tsl - 1 && anchor < values.rows(), "make_window: anchor ", anchor, " out of range");
    WindowSample w;
    w.values.resize(tsl, values.cols());
    for (Index i = 0; i < tsl; ++i) w.values.row(i) = values.row(anchor - i);
    w.label = label;
    w.anchor_index = anchor;
    w.anchor_end = series.interval_starts[static_cast<std::size_t>(anchor)] + series.interval_seconds();
    return w;
}

// All sliding windows (stride 1) over the series, using `values` (typically
// the normalized matrix) for content and `labels` from window_labels.
inline std::vector<WindowSample> make_windows(const AggregatedSeries& series, const Matrix& values, Index tsl,
                                              const std::vector<int>& labels) {
    require(values.rows() == series.rows(), "make_windows: values/series row mismatch");
    require(labels.size() == static_cast<std::size_t>(series.rows() - tsl + 1), "make_windows: label count mismatch");
    std::vector<WindowSample> windows;
    windows.reserve(labels.size());
    for (Index anchor = tsl - 1; anchor < series.rows(); ++anchor)
        windows.push_back(make_window(series, values, tsl, anchor, labels[static_cast<std::size_t>(anchor - tsl + 1)]));
    return windows;
}

// Window matrix (TSL x D) <-> flat row (TSL*D), row-major by window row.
inline Vector flatten_window(const Matrix& window) {
    Vector flat(window.rows() * window.cols());
    for (Index r = 0; r < window.rows(); ++r) flat.segment(r * window.cols(), window.cols()) = window.row(r);
    return flat;
}

inline Matrix unflatten_window(const Vector& flat, Index tsl, Index cols) {
    require(flat.size() == tsl * cols, "unflatten_window: size mismatch");
    Matrix window(tsl, cols);
    for (Index r = 0; r < tsl; ++r) window.row(r) = flat.segment(r * cols, cols).transpose();
    return window;
}

struct KfoldOptions {
    int k = 5;
    std::uint64_t seed = 0;
};

// Stratified random partition: crash and non-crash windows are shuffled
// separately and dealt round-robin, so crashes spread as evenly as possible.
inline FoldSplit kfold_split(const std::vector<int>& labels, const KfoldOptions& opts,
                             std::vector<std::string>* warnings = nullptr) {
    require(opts.k >= 2, "kfold_split: k must be >= 2");
    require(labels.size() >= static_cast<std::size_t>(opts.k), "kfold_split: only ", labels.size(),
            " windows for k=", opts.k);
    std::vector<Index> positives, negatives;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? positives : negatives).push_back(static_cast<Index>(i));
    if (warnings && positives.size() < static_cast<std::size_t>(opts.k)) {
        std::ostringstream os;
        os << "kfold: only " << positives.size() << " crash windows for " << opts.k
           << " folds; some test folds have no crash";
        warnings->push_back(os.str());
    }
    Rng rng(derive_seed(opts.seed, "kfold"));
    rng.shuffle(positives);
    rng.shuffle(negatives);

    FoldSplit splitd;
    splitd.k = opts.k;
    splitd.test_indices.assign(static_cast<std::size_t>(opts.k), {});
    for (std::size_t i = 0; i < positives.size(); ++i)
        splitd.test_indices[i % static_cast<std::size_t>(opts.k)].push_back(positives[i]);
    for (std::size_t i = 0; i < negatives.size(); ++i)
        splitd.test_indices[i % static_cast<std::size_t>(opts.k)].push_back(negatives[i]);
    for (auto& fold : splitd.test_indices) std::sort(fold.begin(), fold.end());
    return splitd;
}

}  // namespace accdet
