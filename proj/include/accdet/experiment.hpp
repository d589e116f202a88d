#pragma once
// Run configuration and the cross-validation experiment: per fold, fit the
// normalizer on rows covered by training windows only, resample the flattened
// training windows, train, then score the untouched test windows
// chronologically and evaluate at each requested DoF.
#include <atomic>
#include <filesystem>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "accdet/config.hpp"
#include "accdet/data/io.hpp"
#include "accdet/data/pipeline.hpp"
#include "accdet/eval.hpp"
#include "accdet/nn/model_io.hpp"
#include "accdet/nn/train.hpp"
#include "accdet/resample.hpp"
#include "accdet/synth.hpp"

namespace accdet {

struct RunConfig {
    // paths
    std::string sensor_csv;
    std::string crash_csv;
    std::string layout_path;
    std::string out_dir = ".";

    // dataset geometry
    double dai_minutes = 3.0;
    Index tsl = 6;
    std::vector<int> dof_list = {0, 1, 6, 12};
    double exclude_post_crash_minutes = 0.0;  // drop post-crash negatives from training when > 0

    // resampling (applied to training folds only)
    ResampleConfig resample;

    // training
    TrainConfig training;
    int folds = 5;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = min(folds, hardware)
    int histogram_bins = 100;

    // synthesis (cmd_synth)
    double synth_days = 60.0;
    Index synth_crash_count = 40;
    std::string site_id = "site1";

    // sweep axes (cmd_sweep)
    std::vector<Index> sweep_tsl = {2, 4, 6, 8, 10, 12};
    std::vector<double> sweep_dai = {1.0, 3.0, 5.0};

    ValidityConfig validity;

    void validate() const {
        require(dai_minutes > 0.0, "config: dai_minutes must be positive");
        require(tsl >= 1, "config: tsl must be >= 1");
        require(!dof_list.empty(), "config: dof_list must be nonempty");
        for (int d : dof_list) require(d >= 0, "config: dof values must be >= 0");
        require(folds >= 2, "config: folds must be >= 2");
        require(resample.k >= 1, "config: resample k must be >= 1");
        require(resample.target_ratio > 0.0 && resample.target_ratio <= 1.0,
                "config: target_ratio must be in (0,1]");
        require(exclude_post_crash_minutes >= 0.0, "config: exclude_post_crash_minutes must be >= 0");
        require(histogram_bins >= 1, "config: histogram_bins must be >= 1");
        require(workers >= 0, "config: workers must be >= 0");
        training.validate();
    }
};

inline std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& part : split(text, ','))
        if (!part.empty()) out.push_back(static_cast<int>(std::stoll(part)));
    return out;
}

inline RunConfig load_run_config(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::load(path);
    RunConfig cfg;
    cfg.sensor_csv = kv.get_or("sensor_csv", cfg.sensor_csv);
    cfg.crash_csv = kv.get_or("crash_csv", cfg.crash_csv);
    cfg.layout_path = kv.get_or("layout", cfg.layout_path);
    cfg.out_dir = kv.get_or("out_dir", cfg.out_dir);
    cfg.dai_minutes = kv.get_double("dai_minutes", cfg.dai_minutes);
    cfg.tsl = static_cast<Index>(kv.get_int("tsl", cfg.tsl));
    if (auto v = kv.get("dof_list")) cfg.dof_list = parse_int_list(*v);
    cfg.exclude_post_crash_minutes = kv.get_double("exclude_post_crash_minutes", cfg.exclude_post_crash_minutes);

    if (auto v = kv.get("resample_method")) cfg.resample.method = resample_method_from_string(*v);
    cfg.resample.k = static_cast<int>(kv.get_int("resample_k", cfg.resample.k));
    cfg.resample.target_ratio = kv.get_double("target_ratio", cfg.resample.target_ratio);
    if (auto v = kv.get("tomek_mode")) {
        if (*v == "remove_both")
            cfg.resample.tomek_mode = TomekMode::RemoveBoth;
        else if (*v == "remove_majority_only")
            cfg.resample.tomek_mode = TomekMode::RemoveMajorityOnly;
        else
            fail(path, ": unknown tomek_mode '", *v, "'");
    }

    if (auto v = kv.get("encoder")) cfg.training.shape.encoder = encoder_kind_from_string(*v);
    cfg.training.shape.encoder_output_dim =
        static_cast<Index>(kv.get_int("encoder_output_dim", cfg.training.shape.encoder_output_dim));
    if (auto v = kv.get("hidden_dims")) {
        cfg.training.shape.hidden_dims.clear();
        for (int h : parse_int_list(*v)) cfg.training.shape.hidden_dims.push_back(h);
    }
    cfg.training.shape.leaky_slope = kv.get_double("leaky_slope", cfg.training.shape.leaky_slope);
    cfg.training.shape.dropout_rate = kv.get_double("dropout_rate", cfg.training.shape.dropout_rate);
    if (auto v = kv.get("optimizer")) cfg.training.optimizer.kind = optimizer_kind_from_string(*v);
    cfg.training.optimizer.lr = kv.get_double("lr", cfg.training.optimizer.lr);
    cfg.training.optimizer.momentum = kv.get_double("momentum", cfg.training.optimizer.momentum);
    cfg.training.optimizer.beta1 = kv.get_double("beta1", cfg.training.optimizer.beta1);
    cfg.training.optimizer.beta2 = kv.get_double("beta2", cfg.training.optimizer.beta2);
    cfg.training.optimizer.epsilon = kv.get_double("epsilon", cfg.training.optimizer.epsilon);
    cfg.training.w1 = kv.get_double("class_weight_crash", cfg.training.w1);
    cfg.training.w2 = kv.get_double("class_weight_noncrash", cfg.training.w2);
    cfg.training.batch_size = static_cast<Index>(kv.get_int("batch_size", cfg.training.batch_size));
    cfg.training.epochs = static_cast<Index>(kv.get_int("epochs", cfg.training.epochs));
    if (auto v = kv.get("grad_clip_norm")) cfg.training.grad_clip_norm = std::stod(*v);

    cfg.folds = static_cast<int>(kv.get_int("folds", cfg.folds));
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(cfg.seed)));
    cfg.workers = static_cast<int>(kv.get_int("workers", cfg.workers));
    cfg.histogram_bins = static_cast<int>(kv.get_int("histogram_bins", cfg.histogram_bins));

    cfg.synth_days = kv.get_double("synth_days", cfg.synth_days);
    cfg.synth_crash_count = static_cast<Index>(kv.get_int("synth_crash_count", cfg.synth_crash_count));
    cfg.site_id = kv.get_or("site_id", cfg.site_id);

    if (auto v = kv.get("sweep_tsl")) {
        cfg.sweep_tsl.clear();
        for (int t : parse_int_list(*v)) cfg.sweep_tsl.push_back(t);
    }
    if (auto v = kv.get("sweep_dai")) {
        cfg.sweep_dai.clear();
        for (const auto& part : split(*v, ','))
            if (!part.empty()) cfg.sweep_dai.push_back(std::stod(part));
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_echo(const RunConfig& cfg) {
    nlohmann::json j;
    j["sensor_csv"] = cfg.sensor_csv;
    j["crash_csv"] = cfg.crash_csv;
    j["layout"] = cfg.layout_path;
    j["dai_minutes"] = cfg.dai_minutes;
    j["tsl"] = cfg.tsl;
    j["dof_list"] = cfg.dof_list;
    j["exclude_post_crash_minutes"] = cfg.exclude_post_crash_minutes;
    j["resample"] = {{"method", to_string(cfg.resample.method)},
                     {"k", cfg.resample.k},
                     {"target_ratio", cfg.resample.target_ratio},
                     {"tomek_mode", cfg.resample.tomek_mode == TomekMode::RemoveBoth ? "remove_both"
                                                                                     : "remove_majority_only"}};
    j["encoder"] = to_string(cfg.training.shape.encoder);
    j["encoder_output_dim"] = cfg.training.shape.encoder_output_dim;
    j["hidden_dims"] = cfg.training.shape.hidden_dims;
    j["leaky_slope"] = cfg.training.shape.leaky_slope;
    j["dropout_rate"] = cfg.training.shape.dropout_rate;
    j["optimizer"] = to_string(cfg.training.optimizer.kind);
    j["learning_rate"] = cfg.training.optimizer.lr;
    j["momentum"] = cfg.training.optimizer.momentum;
    j["class_weights"] = {cfg.training.w1, cfg.training.w2};
    j["batch_size"] = cfg.training.batch_size;
    j["epochs"] = cfg.training.epochs;
    j["grad_clip_norm"] = cfg.training.grad_clip_norm ? nlohmann::json(*cfg.training.grad_clip_norm)
                                                      : nlohmann::json(nullptr);
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["histogram_bins"] = cfg.histogram_bins;
    return j;
}

struct PreparedData {
    SiteLayout layout;
    AggregatedSeries series;
    std::vector<int> labels;          // one per window anchor
    std::set<Index> crash_intervals;  // deduped series rows containing a crash
    CleanseReport cleanse_report;
    Index positives = 0;
};

inline PreparedData prepare_dataset(const RunConfig& cfg) {
    PreparedData data;
    data.layout = load_layout(cfg.layout_path);
    auto readings = ingest_sensor_csv(cfg.sensor_csv, data.layout);
    auto crashes = discard_offsite_crashes(ingest_crash_csv(cfg.crash_csv), data.layout);
    data.cleanse_report = cleanse(readings, cfg.validity);
    data.series = aggregate(readings, data.layout, cfg.dai_minutes);
    data.labels = window_labels(data.series, cfg.tsl, crashes);
    for (int v : data.labels) data.positives += v;
    const std::int64_t interval = data.series.interval_seconds();
    for (const auto& c : crashes) {
        const std::int64_t offset = c.timestamp - data.series.start_timestamp;
        if (offset < 0) continue;
        const Index t = static_cast<Index>(offset / interval);
        if (t < data.series.rows()) data.crash_intervals.insert(t);
    }
    return data;
}

struct DofMetrics {
    int dof = 0;
    ConfusionCounts counts;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> accuracy;
    double auc = 0.0;
    RocCurve roc_curve;
};

// Threshold-0.5 decision metrics plus the full ROC sweep for each DoF.
inline std::vector<DofMetrics> evaluate_scores(const std::vector<double>& scores, const std::vector<int>& truth,
                                               const std::vector<int>& dof_list) {
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0.5 ? 1 : 0;
    std::vector<DofMetrics> out;
    const bool two_class = std::find(truth.begin(), truth.end(), 1) != truth.end() &&
                           std::find(truth.begin(), truth.end(), 0) != truth.end();
    for (int dof : dof_list) {
        DofMetrics m;
        m.dof = dof;
        m.counts = dof_confusion(truth, pred, dof);
        m.sensitivity = sensitivity(m.counts);
        m.specificity = specificity(m.counts);
        m.accuracy = accuracy(m.counts);
        if (two_class) {
            m.roc_curve = roc(scores, truth, dof);
            m.auc = m.roc_curve.auc;
        }
        out.push_back(std::move(m));
    }
    return out;
}

struct FoldResult {
    int fold = 0;
    ClassCounts resample_before, resample_after;
    std::vector<std::string> warnings;
    double initial_loss = 0.0;
    std::vector<double> loss_trace;
    std::vector<DofMetrics> metrics;
    std::vector<double> test_scores;
    std::vector<int> test_truth;
    Index train_windows = 0;
    Index test_windows = 0;
    Index dropped_disturbance_windows = 0;
    ModelFile model;
    std::string model_file;  // relative file name
};

// Rows of the aggregated series covered by at least one training window.
inline std::vector<Index> covered_rows(const std::vector<Index>& train_anchors, Index tsl) {
    std::set<Index> rows;
    for (Index anchor : train_anchors)
        for (Index i = 0; i < tsl; ++i) rows.insert(anchor - i);
    return {rows.begin(), rows.end()};
}

inline Index anchor_of(Index label_index, Index tsl) { return label_index + tsl - 1; }

inline FoldResult run_fold(const RunConfig& cfg, const PreparedData& data, const FoldSplit& split, int fold) {
    std::string stage = "setup";
    try {
        FoldResult result;
        result.fold = fold;
        const Index total = static_cast<Index>(data.labels.size());
        const auto test_label_indices = split.test_indices[static_cast<std::size_t>(fold)];
        const auto train_label_indices = split.train_indices(fold, total);

        // Optionally drop post-crash disturbance windows from the training
        // negatives; the labeled crash window itself always stays.
        stage = "window selection";
        std::vector<Index> train_kept;
        const Index horizon_intervals =
            cfg.exclude_post_crash_minutes > 0.0
                ? static_cast<Index>(std::ceil(cfg.exclude_post_crash_minutes / cfg.dai_minutes))
                : 0;
        for (Index li : train_label_indices) {
            const Index anchor = anchor_of(li, cfg.tsl);
            bool drop = false;
            if (horizon_intervals > 0 && data.labels[static_cast<std::size_t>(li)] == 0) {
                for (Index c : data.crash_intervals) {
                    if (anchor > c && anchor <= c + horizon_intervals) {
                        drop = true;
                        break;
                    }
                }
            }
            if (drop)
                ++result.dropped_disturbance_windows;
            else
                train_kept.push_back(li);
        }

        stage = "normalize";
        std::vector<Index> train_anchors;
        for (Index li : train_kept) train_anchors.push_back(anchor_of(li, cfg.tsl));
        const auto rows = covered_rows(train_anchors, cfg.tsl);
        Matrix train_rows(static_cast<Index>(rows.size()), data.series.values.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) train_rows.row(static_cast<Index>(i)) = data.series.values.row(rows[i]);
        const NormalizationStats stats = fit_normalizer(train_rows);
        const Matrix norm_values = apply_normalizer(stats, data.series.values);

        stage = "resample";
        LabeledDataset train_flat;
        train_flat.x.resize(static_cast<Index>(train_kept.size()), cfg.tsl * data.series.values.cols());
        for (std::size_t i = 0; i < train_kept.size(); ++i) {
            const Index li = train_kept[i];
            const WindowSample w = make_window(data.series, norm_values, cfg.tsl, anchor_of(li, cfg.tsl),
                                               data.labels[static_cast<std::size_t>(li)]);
            train_flat.x.row(static_cast<Index>(i)) = flatten_window(w.values).transpose();
            train_flat.y.push_back(w.label);
        }
        ResampleConfig resample_cfg = cfg.resample;
        resample_cfg.seed = derive_seed(cfg.seed, "resample", static_cast<std::uint64_t>(fold));
        const ResampleResult resampled = resample(train_flat, resample_cfg);
        result.resample_before = resampled.before;
        result.resample_after = resampled.after;
        result.warnings = resampled.warnings;

        stage = "train";
        std::vector<WindowSample> train_windows(static_cast<std::size_t>(resampled.data.size()));
        for (Index i = 0; i < resampled.data.size(); ++i) {
            train_windows[static_cast<std::size_t>(i)].values =
                unflatten_window(resampled.data.x.row(i).transpose(), cfg.tsl, data.series.values.cols());
            train_windows[static_cast<std::size_t>(i)].label = resampled.data.y[static_cast<std::size_t>(i)];
        }
        result.train_windows = resampled.data.size();
        TrainConfig train_cfg = cfg.training;
        train_cfg.shape.input_size = data.series.values.cols();
        const TrainResult trained =
            train(train_cfg, train_windows, derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(fold)));
        result.initial_loss = trained.initial_loss;
        result.loss_trace = trained.epoch_losses;

        stage = "evaluate";
        result.test_windows = static_cast<Index>(test_label_indices.size());
        for (Index li : test_label_indices) {  // sorted = chronological
            const WindowSample w = make_window(data.series, norm_values, cfg.tsl, anchor_of(li, cfg.tsl),
                                               data.labels[static_cast<std::size_t>(li)]);
            const Vector enc = encode_sequence(trained.params.encoder, w.values);
            result.test_scores.push_back(classify(trained.params, enc, ClassifyMode::Eval));
            result.test_truth.push_back(w.label);
        }
        result.metrics = evaluate_scores(result.test_scores, result.test_truth, cfg.dof_list);

        stage = "package";
        result.model.params = trained.params;
        result.model.stats = stats;
        result.model.header = header_from_shape(train_cfg.shape);
        result.model.header["seed"] = cfg.seed;
        result.model.header["fold"] = fold;
        result.model.header["dai_minutes"] = cfg.dai_minutes;
        result.model.header["tsl"] = cfg.tsl;
        result.model.header["site_id"] = data.layout.site_id;
        result.model.header["hyperparameters"] = {{"optimizer", to_string(train_cfg.optimizer.kind)},
                                                  {"lr", train_cfg.optimizer.lr},
                                                  {"momentum", train_cfg.optimizer.momentum},
                                                  {"batch_size", train_cfg.batch_size},
                                                  {"epochs", train_cfg.epochs},
                                                  {"class_weights", {train_cfg.w1, train_cfg.w2}},
                                                  {"resample", to_string(cfg.resample.method)}};
        result.model_file = "fold_" + std::to_string(fold) + ".model";
        return result;
    } catch (const Error& e) {
        fail("fold ", fold, ": ", stage, ": ", e.what());
    }
}

// Runs fn(i) for i in [0, count) on up to `workers` threads; exceptions are
// re-thrown in index order so failures are deterministic.
template <class Fn>
void parallel_for_indices(int count, int workers, Fn&& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct ExperimentResult {
    std::vector<FoldResult> folds;
    std::vector<std::string> warnings;
    PreparedData data;
};

inline ExperimentResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    result.data = prepare_dataset(cfg);
    require(result.data.positives >= 1, "train: dataset has no crash windows");
    const FoldSplit split =
        kfold_split(result.data.labels, {cfg.folds, derive_seed(cfg.seed, "kfold")}, &result.warnings);
    for (const auto& flag : result.data.cleanse_report.dead_sensor_flags) result.warnings.push_back(flag);

    result.folds.resize(static_cast<std::size_t>(cfg.folds));
    const int workers = cfg.workers > 0 ? cfg.workers : std::min<int>(cfg.folds, static_cast<int>(std::thread::hardware_concurrency()));
    parallel_for_indices(cfg.folds, workers,
                         [&](int fold) { result.folds[static_cast<std::size_t>(fold)] = run_fold(cfg, result.data, split, fold); });
    return result;
}

}  // namespace accdet
