#pragma once
// Evaluation: DoF-aware confusion accounting, ROC/AUC, class-separability
// distances over density histograms, and 2D PCA projection.
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "accdet/common.hpp"

namespace accdet {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;

    std::int64_t total() const { return tp + fn + tn + fp; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fn += o.fn;
        tn += o.tn;
        fp += o.fp;
        return *this;
    }
};

// Confusion matrix with a degree of flexibility: a true crash at j counts as
// detected if any prediction fires within j±dof, and a positive prediction at
// j is not a false alarm if any true crash lies within j±dof. Every index
// increments exactly one counter, so tp+fn+tn+fp always equals the sequence
// length. dof = 0 reduces to the standard confusion matrix.
inline ConfusionCounts dof_confusion(const std::vector<int>& truth, const std::vector<int>& pred, int dof) {
    require(truth.size() == pred.size(), "dof_confusion: length mismatch (truth ", truth.size(), ", pred ",
            pred.size(), ")");
    require(dof >= 0, "dof_confusion: dof must be >= 0");
    const std::ptrdiff_t j_count = static_cast<std::ptrdiff_t>(truth.size());
    // Prefix sums make each window query O(1); ROC sweeps call this per
    // threshold over long sequences.
    std::vector<std::int64_t> pred_cum(truth.size() + 1, 0), truth_cum(truth.size() + 1, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        pred_cum[i + 1] = pred_cum[i] + pred[i];
        truth_cum[i + 1] = truth_cum[i] + truth[i];
    }
    ConfusionCounts c;
    for (std::ptrdiff_t j = 0; j < j_count; ++j) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, j - dof);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(j_count - 1, j + dof);
        const std::int64_t pred_sum = pred_cum[static_cast<std::size_t>(hi + 1)] - pred_cum[static_cast<std::size_t>(lo)];
        const std::int64_t truth_sum =
            truth_cum[static_cast<std::size_t>(hi + 1)] - truth_cum[static_cast<std::size_t>(lo)];
        if (truth[static_cast<std::size_t>(j)] == 1) {
            if (pred_sum > 0)
                ++c.tp;
            else
                ++c.fn;
        } else {
            if (pred[static_cast<std::size_t>(j)] == 1 && truth_sum == 0)
                ++c.fp;
            else
                ++c.tn;
        }
    }
    return c;
}

// Ratios are undefined (nullopt) when their denominator is zero.
inline std::optional<double> sensitivity(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline std::optional<double> specificity(const ConfusionCounts& c) {
    if (c.tn + c.fp == 0) return std::nullopt;
    return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

inline std::optional<double> accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) return std::nullopt;
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // sorted by ascending fpr, then tpr
    double auc = 0.0;
};

// Threshold sweep over the unique score set plus {0, 1}; prediction rule is
// score >= threshold. AUC by trapezoid over the FPR-sorted curve.
inline RocCurve roc(const std::vector<double>& scores, const std::vector<int>& truth, int dof) {
    require(scores.size() == truth.size(), "roc: length mismatch");
    require(!truth.empty(), "roc: empty input");
    const bool has_pos = std::find(truth.begin(), truth.end(), 1) != truth.end();
    const bool has_neg = std::find(truth.begin(), truth.end(), 0) != truth.end();
    require(has_pos && has_neg, "roc: need both classes in the true labels");

    std::vector<double> thresholds(scores);
    thresholds.push_back(0.0);
    thresholds.push_back(1.0);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocCurve curve;
    std::vector<int> pred(scores.size());
    for (double thr : thresholds) {
        for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= thr ? 1 : 0;
        const ConfusionCounts c = dof_confusion(truth, pred, dof);
        const double fpr = specificity(c) ? 1.0 - *specificity(c) : 0.0;
        const double tpr = sensitivity(c) ? *sensitivity(c) : 0.0;
        curve.points.push_back({thr, fpr, tpr});
    }
    // Anchor the corners so the trapezoid integral covers the full FPR range
    // even when the extreme scores are exactly 0 or 1.
    auto has_point = [&](double fpr, double tpr) {
        for (const auto& pt : curve.points)
            if (pt.fpr == fpr && pt.tpr == tpr) return true;
        return false;
    };
    if (!has_point(0.0, 0.0)) curve.points.push_back({1.0, 0.0, 0.0});
    if (!has_point(1.0, 1.0)) curve.points.push_back({0.0, 1.0, 1.0});
    std::sort(curve.points.begin(), curve.points.end(), [](const RocPoint& a, const RocPoint& b) {
        if (a.fpr != b.fpr) return a.fpr < b.fpr;
        return a.tpr < b.tpr;
    });
    double auc = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

// Equal-width density histogram: sum(density * width) == 1.
struct Histogram {
    std::vector<double> edges;    // n_bins + 1, ascending
    std::vector<double> density;  // n_bins, >= 0

    std::size_t bins() const { return density.size(); }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double mass(std::size_t i) const { return density[i] * width(i); }
};

inline std::vector<double> histogram_edges(double lo, double hi, int n_bins, double degenerate_width = 1.0) {
    require(n_bins >= 1, "histogram: n_bins must be >= 1");
    std::vector<double> edges;
    if (lo == hi) {
        // Degenerate range: one bin of fixed width centered on the value.
        edges = {lo - degenerate_width / 2.0, lo + degenerate_width / 2.0};
        return edges;
    }
    edges.resize(static_cast<std::size_t>(n_bins) + 1);
    const double w = (hi - lo) / n_bins;
    for (int i = 0; i <= n_bins; ++i) edges[static_cast<std::size_t>(i)] = lo + w * i;
    edges.back() = hi;
    return edges;
}

inline Histogram histogram_with_edges(const std::vector<double>& values, const std::vector<double>& edges) {
    require(edges.size() >= 2, "histogram: need at least one bin");
    require(!values.empty(), "histogram: need at least one value");
    Histogram h;
    h.edges = edges;
    h.density.assign(edges.size() - 1, 0.0);
    const double lo = edges.front();
    const double hi = edges.back();
    const std::size_t n_bins = h.density.size();
    const double inv_w = static_cast<double>(n_bins) / (hi - lo);
    for (double v : values) {
        std::size_t bin;
        if (v >= hi) {
            bin = n_bins - 1;  // top edge inclusive
        } else if (v <= lo) {
            bin = 0;
        } else {
            bin = static_cast<std::size_t>((v - lo) * inv_w);
            if (bin >= n_bins) bin = n_bins - 1;
        }
        h.density[bin] += 1.0;
    }
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < n_bins; ++i) h.density[i] /= n * h.width(i);
    return h;
}

inline Histogram histogram(const std::vector<double>& values, int n_bins, double degenerate_width = 1.0) {
    require(!values.empty(), "histogram: need at least one value");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return histogram_with_edges(values, histogram_edges(*lo, *hi, n_bins, degenerate_width));
}

// Histograms for two classes over shared edges spanning the pooled range.
inline std::pair<Histogram, Histogram> class_histograms(const std::vector<double>& a, const std::vector<double>& b,
                                                        int n_bins, double degenerate_width = 1.0) {
    require(!a.empty() && !b.empty(), "class_histograms: both classes need values");
    double lo = a[0], hi = a[0];
    for (double v : a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : b) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const auto edges = histogram_edges(lo, hi, n_bins, degenerate_width);
    return {histogram_with_edges(a, edges), histogram_with_edges(b, edges)};
}

inline void check_same_edges(const Histogram& h1, const Histogram& h2, const char* who) {
    require(h1.edges == h2.edges, who, ": histograms must share bin edges");
}

// Sum of |CDF1 - CDF2| * bin_width.
inline double wasserstein_1d(const Histogram& h1, const Histogram& h2) {
    check_same_edges(h1, h2, "wasserstein_1d");
    double cdf1 = 0.0, cdf2 = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < h1.bins(); ++i) {
        cdf1 += h1.mass(i);
        cdf2 += h2.mass(i);
        dist += std::abs(cdf1 - cdf2) * h1.width(i);
    }
    return dist;
}

// -ln sum sqrt(p_i q_i). Disjoint supports give -ln 0; reported as a finite
// cap so averages stay usable.
constexpr double kBhattacharyyaCap = 1e6;

inline double bhattacharyya(const Histogram& h1, const Histogram& h2, double cap = kBhattacharyyaCap) {
    check_same_edges(h1, h2, "bhattacharyya");
    double bc = 0.0;
    for (std::size_t i = 0; i < h1.bins(); ++i) bc += std::sqrt(h1.mass(i) * h2.mass(i));
    if (bc <= 0.0) return cap;
    return std::min(cap, -std::log(bc));
}

// Jensen-Shannon divergence with natural log; bounded by ln 2.
inline double js_divergence(const Histogram& h1, const Histogram& h2) {
    check_same_edges(h1, h2, "js_divergence");
    auto kl_term = [](double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; };
    double js = 0.0;
    for (std::size_t i = 0; i < h1.bins(); ++i) {
        const double p = h1.mass(i);
        const double q = h2.mass(i);
        const double m = 0.5 * (p + q);
        if (m > 0.0) js += 0.5 * kl_term(p, m) + 0.5 * kl_term(q, m);
    }
    return js;
}

struct FeatureSpaceSeparability {
    std::string space;
    std::vector<double> wasserstein;  // per feature column
    std::vector<double> bhattacharyya;
    std::vector<double> js;
    double mean_wasserstein = 0.0;
    double mean_bhattacharyya = 0.0;
    double mean_js = 0.0;
};

struct SeparabilityReport {
    std::vector<FeatureSpaceSeparability> spaces;
};

// Per-column distance between crash and non-crash value distributions,
// plus the average over columns.
inline FeatureSpaceSeparability feature_space_separability(const Matrix& features, const std::vector<int>& labels,
                                                           std::string space_name, int n_bins = 100) {
    require(features.rows() == static_cast<Index>(labels.size()), "separability: row/label count mismatch");
    FeatureSpaceSeparability out;
    out.space = std::move(space_name);
    std::vector<double> pos, neg;
    for (Index col = 0; col < features.cols(); ++col) {
        pos.clear();
        neg.clear();
        for (Index r = 0; r < features.rows(); ++r) {
            (labels[static_cast<std::size_t>(r)] == 1 ? pos : neg).push_back(features(r, col));
        }
        require(!pos.empty() && !neg.empty(), "separability: need samples of both classes");
        const auto [hp, hn] = class_histograms(pos, neg, n_bins);
        out.wasserstein.push_back(wasserstein_1d(hp, hn));
        out.bhattacharyya.push_back(bhattacharyya(hp, hn));
        out.js.push_back(js_divergence(hp, hn));
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    out.mean_wasserstein = mean(out.wasserstein);
    out.mean_bhattacharyya = mean(out.bhattacharyya);
    out.mean_js = mean(out.js);
    return out;
}

struct Pca2d {
    Matrix projected;                     // N x 2
    double explained[2] = {0.0, 0.0};     // fraction of total variance
    Matrix components;                    // D x 2, unit columns
    Vector column_means;
};

// Projection onto the top-2 eigenvectors of the column-centered covariance.
// Sign convention: the largest-magnitude entry of each component is positive.
inline Pca2d pca_2d(const Matrix& x) {
    require(x.rows() >= 2, "pca_2d: need at least two rows");
    const Index n = x.rows();
    const Index d = x.cols();
    Pca2d out;
    out.column_means = x.colwise().mean();
    Matrix centered = x.rowwise() - out.column_means.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    require(solver.info() == Eigen::Success, "pca_2d: eigen decomposition failed");
    const Vector evals = solver.eigenvalues();  // ascending
    double total = 0.0;
    for (Index i = 0; i < d; ++i) total += std::max(0.0, evals(i));
    out.components.resize(d, 2);
    for (int k = 0; k < 2; ++k) {
        const Index src = d - 1 - k;
        Vector v = (src >= 0) ? Vector(solver.eigenvectors().col(src)) : Vector(Vector::Zero(d));
        Index max_i = 0;
        v.cwiseAbs().maxCoeff(&max_i);
        if (v(max_i) < 0.0) v = -v;
        out.components.col(k) = v;
        const double lambda = (src >= 0) ? std::max(0.0, evals(src)) : 0.0;
        out.explained[k] = total > 0.0 ? lambda / total : 0.0;
    }
    out.projected = centered * out.components;
    return out;
}

}  // namespace accdet
