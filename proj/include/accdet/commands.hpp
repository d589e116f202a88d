#pragma once
// The five entry points behind the CLI verbs: synth, train, evaluate, sweep,
// separability. Each writes its artifacts under cfg.out_dir and returns the
// report JSON. Reports are byte-reproducible given (config, seed, inputs);
// wall-clock timings go to a separate timing.json sidecar.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "accdet/experiment.hpp"

namespace accdet {

namespace detail {

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write '", path, "'");
    out << content;
}

inline std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot hash '", path, "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(bytes.data(), bytes.size());
    return os.str();
}

inline nlohmann::json optional_metric(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json metrics_json(const std::vector<DofMetrics>& metrics) {
    nlohmann::json out;
    for (const auto& m : metrics) {
        out["dof_" + std::to_string(m.dof)] = {{"tp", m.counts.tp},
                                               {"fn", m.counts.fn},
                                               {"tn", m.counts.tn},
                                               {"fp", m.counts.fp},
                                               {"sensitivity", optional_metric(m.sensitivity)},
                                               {"specificity", optional_metric(m.specificity)},
                                               {"accuracy", optional_metric(m.accuracy)},
                                               {"auc", m.auc}};
    }
    return out;
}

// Mean of the per-fold metrics, per DoF, skipping undefined entries.
inline nlohmann::json average_metrics_json(const std::vector<FoldResult>& folds, const std::vector<int>& dof_list) {
    nlohmann::json out;
    for (std::size_t di = 0; di < dof_list.size(); ++di) {
        double sens = 0.0, spec = 0.0, acc = 0.0, auc = 0.0;
        int n_sens = 0, n_spec = 0, n_acc = 0, n_auc = 0;
        for (const auto& fold : folds) {
            const auto& m = fold.metrics[di];
            if (m.sensitivity) {
                sens += *m.sensitivity;
                ++n_sens;
            }
            if (m.specificity) {
                spec += *m.specificity;
                ++n_spec;
            }
            if (m.accuracy) {
                acc += *m.accuracy;
                ++n_acc;
            }
            if (m.auc > 0.0) {
                auc += m.auc;
                ++n_auc;
            }
        }
        out["dof_" + std::to_string(dof_list[di])] = {
            {"sensitivity", n_sens ? nlohmann::json(sens / n_sens) : nlohmann::json(nullptr)},
            {"specificity", n_spec ? nlohmann::json(spec / n_spec) : nlohmann::json(nullptr)},
            {"accuracy", n_acc ? nlohmann::json(acc / n_acc) : nlohmann::json(nullptr)},
            {"auc", n_auc ? nlohmann::json(auc / n_auc) : nlohmann::json(nullptr)}};
    }
    return out;
}

inline void write_roc_csv(const std::string& path, const std::vector<DofMetrics>& metrics) {
    std::ofstream out(path);
    require(out.good(), "cannot write '", path, "'");
    out << "dof,threshold,fpr,tpr\n";
    char buf[128];
    for (const auto& m : metrics) {
        for (const auto& pt : m.roc_curve.points) {
            std::snprintf(buf, sizeof buf, "%d,%.9f,%.9f,%.9f", m.dof, pt.threshold, pt.fpr, pt.tpr);
            out << buf << "\n";
        }
    }
}

inline void write_pca_csv(const std::string& path, const Pca2d& pca, const std::vector<int>& labels) {
    std::ofstream out(path);
    require(out.good(), "cannot write '", path, "'");
    out << "pc1,pc2,label\n";
    char buf[128];
    for (Index i = 0; i < pca.projected.rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f,%.9f,%d", pca.projected(i, 0), pca.projected(i, 1),
                      labels[static_cast<std::size_t>(i)]);
        out << buf << "\n";
    }
}

class StageTimer {
public:
    void start(const std::string& name) {
        current_ = name;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        timings_[current_] = timings_.value(current_, 0.0) + dt;
    }
    void write(const std::string& path) const { write_text(path, timings_.dump(2) + "\n"); }

private:
    std::string current_;
    std::chrono::steady_clock::time_point t0_;
    nlohmann::json timings_ = nlohmann::json::object();
};

}  // namespace detail

// Generates the synthetic site dataset: sensor CSV, reported-crash CSV, the
// layout file, and a ground-truth JSON sidecar with the true event data.
inline nlohmann::json cmd_synth(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    const SiteLayout layout = make_reference_layout(cfg.site_id);
    const ScenarioConfig scenario =
        make_default_scenario(layout, cfg.synth_days, cfg.synth_crash_count, derive_seed(cfg.seed, "synth"));
    const SynthResult result = generate(scenario);

    const auto dir = std::filesystem::path(cfg.out_dir);
    write_sensor_csv((dir / "sensors.csv").string(), result.readings);
    write_crash_csv((dir / "crashes.csv").string(), result.reported_records);
    write_crash_csv((dir / "crashes_true.csv").string(), result.true_records);
    save_layout((dir / "layout.cfg").string(), layout);
    detail::write_text((dir / "ground_truth.json").string(), result.ground_truth.dump(2) + "\n");

    nlohmann::json report;
    report["site_id"] = cfg.site_id;
    report["readings"] = result.readings.size();
    report["crashes"] = result.reported_records.size();
    report["sensor_csv_hash"] = detail::hash_file_hex((dir / "sensors.csv").string());
    report["crash_csv_hash"] = detail::hash_file_hex((dir / "crashes.csv").string());
    detail::write_text((dir / "synth_report.json").string(), report.dump(2) + "\n");
    return report;
}

// Full cross-validated training per the pipeline order: split, normalize on
// the training partition, resample the training windows only, window, train;
// one model file per fold plus an averaged report.
inline nlohmann::json cmd_train(const RunConfig& cfg) {
    detail::StageTimer timer;
    timer.start("total");
    std::filesystem::create_directories(cfg.out_dir);
    const ExperimentResult experiment = run_experiment(cfg);
    const auto dir = std::filesystem::path(cfg.out_dir);

    nlohmann::json report;
    report["config"] = config_echo(cfg);
    report["warnings"] = experiment.warnings;
    report["dataset"] = {{"windows", experiment.data.labels.size()},
                         {"crash_windows", experiment.data.positives},
                         {"intervals", experiment.data.series.rows()},
                         {"cleansed_values", experiment.data.cleanse_report.replaced_values}};
    report["provenance"] = {{"normalizer_fit", "train windows only"},
                            {"resampled_partition", "train"},
                            {"test_partition_resampled", false}};

    nlohmann::json folds = nlohmann::json::array();
    for (const auto& fold : experiment.folds) {
        const std::string model_path = (dir / fold.model_file).string();
        save_model(model_path, fold.model);
        nlohmann::json fj;
        fj["fold"] = fold.fold;
        fj["model_file"] = fold.model_file;
        fj["model_hash"] = detail::hash_file_hex(model_path);
        fj["resampling"] = {{"before", {{"majority", fold.resample_before.majority},
                                        {"minority", fold.resample_before.minority}}},
                            {"after", {{"majority", fold.resample_after.majority},
                                       {"minority", fold.resample_after.minority}}}};
        fj["warnings"] = fold.warnings;
        fj["train_windows"] = fold.train_windows;
        fj["test_windows"] = fold.test_windows;
        fj["dropped_disturbance_windows"] = fold.dropped_disturbance_windows;
        fj["initial_loss"] = fold.initial_loss;
        fj["loss_trace"] = fold.loss_trace;
        fj["metrics"] = detail::metrics_json(fold.metrics);
        folds.push_back(std::move(fj));
    }
    report["folds"] = std::move(folds);
    report["averages"] = detail::average_metrics_json(experiment.folds, cfg.dof_list);

    detail::write_text((dir / "report.json").string(), report.dump(2) + "\n");
    for (const auto& fold : experiment.folds)
        detail::write_roc_csv((dir / ("roc_fold_" + std::to_string(fold.fold) + ".csv")).string(), fold.metrics);
    timer.stop();
    timer.write((dir / "timing.json").string());
    return report;
}

// Applies trained models to a dataset (typically a different site or time
// range). Normalization statistics travel with each model; model DAI/TSL
// must match the requested configuration.
inline nlohmann::json cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& model_paths) {
    cfg.validate();
    require(!model_paths.empty(), "evaluate: no model files given");
    std::filesystem::create_directories(cfg.out_dir);
    const auto dir = std::filesystem::path(cfg.out_dir);

    PreparedData data = prepare_dataset(cfg);
    nlohmann::json report;
    report["config"] = config_echo(cfg);
    report["dataset"] = {{"windows", data.labels.size()}, {"crash_windows", data.positives}};

    std::vector<FoldResult> outcomes;
    nlohmann::json models = nlohmann::json::array();
    for (std::size_t mi = 0; mi < model_paths.size(); ++mi) {
        const ModelFile model = load_model(model_paths[mi]);
        const double model_dai = model.header.at("dai_minutes").get<double>();
        const Index model_tsl = model.header.at("tsl").get<Index>();
        require(model_dai == cfg.dai_minutes && model_tsl == cfg.tsl, "evaluate: model '", model_paths[mi],
                "' was trained at DAI=", model_dai, " TSL=", model_tsl, " but the dataset is configured for DAI=",
                cfg.dai_minutes, " TSL=", cfg.tsl);
        const Matrix norm_values = apply_normalizer(model.stats, data.series.values);

        FoldResult outcome;
        outcome.fold = static_cast<int>(mi);
        for (std::size_t li = 0; li < data.labels.size(); ++li) {
            const WindowSample w = make_window(data.series, norm_values, cfg.tsl,
                                               anchor_of(static_cast<Index>(li), cfg.tsl), data.labels[li]);
            const Vector enc = encode_sequence(model.params.encoder, w.values);
            outcome.test_scores.push_back(classify(model.params, enc, ClassifyMode::Eval));
            outcome.test_truth.push_back(w.label);
        }
        outcome.metrics = evaluate_scores(outcome.test_scores, outcome.test_truth, cfg.dof_list);
        detail::write_roc_csv((dir / ("roc_model_" + std::to_string(mi) + ".csv")).string(), outcome.metrics);

        nlohmann::json mj;
        mj["model_file"] = model_paths[mi];
        mj["metrics"] = detail::metrics_json(outcome.metrics);
        models.push_back(std::move(mj));
        outcomes.push_back(std::move(outcome));
    }
    report["models"] = std::move(models);
    report["averages"] = detail::average_metrics_json(outcomes, cfg.dof_list);
    detail::write_text((dir / "evaluate_report.json").string(), report.dump(2) + "\n");
    return report;
}

// Trains and evaluates every (TSL, DAI) cell; per-cell failures are recorded
// without aborting the grid. TTD per cell is DAI*TSL minutes of consumed
// post-crash data.
inline nlohmann::json cmd_sweep(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    const auto dir = std::filesystem::path(cfg.out_dir);

    nlohmann::json report;
    report["config"] = config_echo(cfg);
    report["sweep_tsl"] = cfg.sweep_tsl;
    report["sweep_dai"] = cfg.sweep_dai;
    nlohmann::json cells = nlohmann::json::array();

    std::ofstream grid((dir / "sweep_grid.csv").string());
    require(grid.good(), "cannot write sweep grid");
    grid << "tsl,dai_minutes,ttd_minutes,dof,sensitivity,specificity,accuracy,auc,status\n";

    for (double dai : cfg.sweep_dai) {
        for (Index tsl : cfg.sweep_tsl) {
            RunConfig cell_cfg = cfg;
            cell_cfg.dai_minutes = dai;
            cell_cfg.tsl = tsl;
            cell_cfg.out_dir = (dir / ("cell_tsl" + std::to_string(tsl) + "_dai" + std::to_string(dai))).string();
            nlohmann::json cell;
            cell["tsl"] = tsl;
            cell["dai_minutes"] = dai;
            cell["ttd_minutes"] = dai * static_cast<double>(tsl);
            try {
                const ExperimentResult experiment = run_experiment(cell_cfg);
                cell["averages"] = detail::average_metrics_json(experiment.folds, cfg.dof_list);
                cell["status"] = "ok";
                for (std::size_t di = 0; di < cfg.dof_list.size(); ++di) {
                    const auto& avg = cell["averages"]["dof_" + std::to_string(cfg.dof_list[di])];
                    grid << tsl << "," << dai << "," << dai * static_cast<double>(tsl) << "," << cfg.dof_list[di]
                         << "," << avg["sensitivity"].dump() << "," << avg["specificity"].dump() << ","
                         << avg["accuracy"].dump() << "," << avg["auc"].dump() << ",ok\n";
                }
            } catch (const std::exception& e) {
                cell["status"] = "error";
                cell["error"] = e.what();
                grid << tsl << "," << dai << "," << dai * static_cast<double>(tsl) << ",,,,,,error\n";
            }
            cells.push_back(std::move(cell));
        }
    }
    report["cells"] = std::move(cells);
    detail::write_text((dir / "sweep_report.json").string(), report.dump(2) + "\n");
    return report;
}

// Class-separability comparison between the raw flattened-window space and
// the encoder output space, plus PCA clouds before/after resampling.
inline nlohmann::json cmd_separability(const RunConfig& cfg, const std::string& model_path) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    const auto dir = std::filesystem::path(cfg.out_dir);

    const ModelFile model = load_model(model_path);
    PreparedData data = prepare_dataset(cfg);
    const Matrix norm_values = apply_normalizer(model.stats, data.series.values);

    const Index n = static_cast<Index>(data.labels.size());
    Matrix raw(n, cfg.tsl * data.series.values.cols());
    Matrix encoded(n, model.params.encoder_output_dim);
    for (Index li = 0; li < n; ++li) {
        const WindowSample w =
            make_window(data.series, norm_values, cfg.tsl, anchor_of(li, cfg.tsl), data.labels[static_cast<std::size_t>(li)]);
        raw.row(li) = flatten_window(w.values).transpose();
        encoded.row(li) = encode_sequence(model.params.encoder, w.values).transpose();
    }

    const auto raw_rep = feature_space_separability(raw, data.labels, "raw", cfg.histogram_bins);
    const auto enc_rep = feature_space_separability(encoded, data.labels, "encoded", cfg.histogram_bins);

    auto space_json = [](const FeatureSpaceSeparability& rep) {
        return nlohmann::json{{"space", rep.space},
                              {"mean_wasserstein", rep.mean_wasserstein},
                              {"mean_bhattacharyya", rep.mean_bhattacharyya},
                              {"mean_js", rep.mean_js},
                              {"wasserstein", rep.wasserstein},
                              {"bhattacharyya", rep.bhattacharyya},
                              {"js", rep.js}};
    };

    nlohmann::json report;
    report["config"] = config_echo(cfg);
    report["model_file"] = model_path;
    report["spaces"] = {space_json(raw_rep), space_json(enc_rep)};

    // PCA clouds of the training feature space before and after resampling.
    LabeledDataset flat;
    flat.x = raw;
    flat.y = data.labels;
    const Pca2d before = pca_2d(flat.x);
    detail::write_pca_csv((dir / "pca_before.csv").string(), before, flat.y);
    ResampleConfig resample_cfg = cfg.resample;
    resample_cfg.seed = derive_seed(cfg.seed, "resample-viz");
    const ResampleResult resampled = resample(flat, resample_cfg);
    const Pca2d after = pca_2d(resampled.data.x);
    detail::write_pca_csv((dir / "pca_after.csv").string(), after, resampled.data.y);
    report["pca"] = {{"before", {{"explained", {before.explained[0], before.explained[1]}}}},
                     {"after", {{"explained", {after.explained[0], after.explained[1]}}}},
                     {"resampling", {{"before_minority", resampled.before.minority},
                                     {"after_minority", resampled.after.minority}}}};

    detail::write_text((dir / "separability_report.json").string(), report.dump(2) + "\n");
    return report;
}

}  // namespace accdet
