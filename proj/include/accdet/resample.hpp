#pragma once
// Training-set balancing on flattened window feature vectors: SMOTE and
// ADASYN oversampling, ENN and Tomek-link cleaning, and their composites.
// Everything is brute-force Euclidean and deterministic per seed.
#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "accdet/common.hpp"
#include "accdet/rng.hpp"

namespace accdet {

struct LabeledDataset {
    Matrix x;                // N x D feature rows
    std::vector<int> y;     // 0 = non-crash (majority), 1 = crash (minority)

    Index size() const { return x.rows(); }
};

enum class ResampleMethod { None, Smote, Adasyn, Enn, TomekRemoval, SmoteEnn, SmoteTomek };

enum class TomekMode { RemoveBoth, RemoveMajorityOnly };

struct ResampleConfig {
    ResampleMethod method = ResampleMethod::Smote;
    int k = 5;
    double target_ratio = 1.0;  // minority:majority after oversampling
    TomekMode tomek_mode = TomekMode::RemoveBoth;
    std::uint64_t seed = 0;
    std::optional<double> rho_override;  // fixes the interpolation factor (tests)
};

struct ClassCounts {
    Index majority = 0;
    Index minority = 0;
};

struct ResampleResult {
    LabeledDataset data;
    ClassCounts before;
    ClassCounts after;
    std::vector<std::string> warnings;
};

inline ClassCounts count_classes(const LabeledDataset& d) {
    ClassCounts c;
    for (int label : d.y) (label == 1 ? c.minority : c.majority)++;
    return c;
}

inline const char* to_string(ResampleMethod m) {
    switch (m) {
        case ResampleMethod::None: return "none";
        case ResampleMethod::Smote: return "smote";
        case ResampleMethod::Adasyn: return "adasyn";
        case ResampleMethod::Enn: return "enn";
        case ResampleMethod::TomekRemoval: return "tomek";
        case ResampleMethod::SmoteEnn: return "smote_enn";
        case ResampleMethod::SmoteTomek: return "smote_tomek";
    }
    return "?";
}

inline ResampleMethod resample_method_from_string(std::string_view s) {
    if (s == "none") return ResampleMethod::None;
    if (s == "smote") return ResampleMethod::Smote;
    if (s == "adasyn") return ResampleMethod::Adasyn;
    if (s == "enn") return ResampleMethod::Enn;
    if (s == "tomek") return ResampleMethod::TomekRemoval;
    if (s == "smote_enn") return ResampleMethod::SmoteEnn;
    if (s == "smote_tomek") return ResampleMethod::SmoteTomek;
    fail("unknown resample method '", s, "'");
}

// k nearest rows to x.row(query) by Euclidean distance, excluding the query
// row itself. Ties break toward the lower row index. restrict_to limits the
// candidate pool to rows of one class (requires labels).
inline std::vector<Index> knn(const Matrix& x, Index query, int k, std::optional<int> restrict_to = std::nullopt,
                              const std::vector<int>* labels = nullptr) {
    require(k >= 1, "knn: k must be >= 1");
    if (restrict_to) require(labels != nullptr, "knn: class restriction needs labels");
    std::vector<std::pair<double, Index>> candidates;
    candidates.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        if (i == query) continue;
        if (restrict_to && (*labels)[static_cast<std::size_t>(i)] != *restrict_to) continue;
        candidates.emplace_back((x.row(i) - x.row(query)).squaredNorm(), i);
    }
    require(static_cast<std::size_t>(k) <= candidates.size(), "knn: k=", k, " but only ", candidates.size(),
            " eligible rows");
    std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(candidates[static_cast<std::size_t>(i)].second);
    return out;
}

namespace detail {

inline std::vector<Index> rows_of_class(const LabeledDataset& d, int label) {
    std::vector<Index> idx;
    for (Index i = 0; i < d.size(); ++i)
        if (d.y[static_cast<std::size_t>(i)] == label) idx.push_back(i);
    return idx;
}

inline Index oversample_target(const ClassCounts& c, double ratio) {
    const Index want = static_cast<Index>(std::llround(ratio * static_cast<double>(c.majority)));
    return std::max<Index>(0, want - c.minority);
}

// Interpolated minority points per Eq.-style segment sampling: each synthetic
// row is p + rho * (p_z - p) for a minority row p and one of its k minority
// nearest neighbors p_z.
inline LabeledDataset append_synthetics(const LabeledDataset& d, const std::vector<Index>& minority,
                                        const std::vector<std::vector<Index>>& neighbor_sets,
                                        const std::vector<Index>& per_point_counts, Index total,
                                        const ResampleConfig& cfg, Rng& rng) {
    LabeledDataset out;
    out.x.resize(d.size() + total, d.x.cols());
    out.x.topRows(d.size()) = d.x;
    out.y = d.y;
    out.y.reserve(static_cast<std::size_t>(d.size() + total));
    Index row = d.size();
    for (std::size_t mi = 0; mi < minority.size(); ++mi) {
        const Index p = minority[mi];
        const auto& nbrs = neighbor_sets[mi];
        for (Index c = 0; c < per_point_counts[mi]; ++c) {
            const Index pz = nbrs[static_cast<std::size_t>(rng.below(nbrs.size()))];
            const double rho = cfg.rho_override ? *cfg.rho_override : rng.uniform();
            // p + rho (p_z - p), written so the rho = 0 and rho = 1 endpoints
            // reproduce p and p_z bit-exactly.
            out.x.row(row) = (1.0 - rho) * d.x.row(p) + rho * d.x.row(pz);
            out.y.push_back(1);
            ++row;
        }
    }
    return out;
}

inline void check_minority_size(const ClassCounts& c, int k, const char* who) {
    require(c.minority >= static_cast<Index>(k) + 1, who, ": minority class has ", c.minority,
            " samples but needs at least k+1 = ", k + 1);
}

// Integer allocation proportional to weights, summing exactly to total
// (largest-remainder rounding, ties toward lower index).
inline std::vector<Index> proportional_allocation(const std::vector<double>& weights, Index total) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    std::vector<Index> counts(weights.size(), 0);
    if (sum <= 0.0 || total <= 0) return counts;
    std::vector<std::pair<double, std::size_t>> remainders;
    Index assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = weights[i] / sum * static_cast<double>(total);
        counts[i] = static_cast<Index>(share);
        assigned += counts[i];
        remainders.emplace_back(-(share - static_cast<double>(counts[i])), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (Index extra = 0; extra < total - assigned; ++extra) counts[remainders[static_cast<std::size_t>(extra)].second]++;
    return counts;
}

}  // namespace detail

inline ResampleResult smote(const LabeledDataset& d, const ResampleConfig& cfg) {
    ResampleResult res;
    res.before = count_classes(d);
    detail::check_minority_size(res.before, cfg.k, "smote");
    const Index total = detail::oversample_target(res.before, cfg.target_ratio);
    const auto minority = detail::rows_of_class(d, 1);

    std::vector<std::vector<Index>> neighbor_sets(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i) neighbor_sets[i] = knn(d.x, minority[i], cfg.k, 1, &d.y);

    // Round-robin over minority points so generation spreads evenly.
    std::vector<Index> counts(minority.size(), total / static_cast<Index>(minority.size()));
    for (Index r = 0; r < total % static_cast<Index>(minority.size()); ++r) counts[static_cast<std::size_t>(r)]++;

    Rng rng(derive_seed(cfg.seed, "smote"));
    res.data = detail::append_synthetics(d, minority, neighbor_sets, counts, total, cfg, rng);
    res.after = count_classes(res.data);
    return res;
}

inline ResampleResult adasyn(const LabeledDataset& d, const ResampleConfig& cfg) {
    ResampleResult res;
    res.before = count_classes(d);
    detail::check_minority_size(res.before, cfg.k, "adasyn");
    const Index total = detail::oversample_target(res.before, cfg.target_ratio);
    const auto minority = detail::rows_of_class(d, 1);

    // Difficulty r_i: fraction of majority points among the k nearest
    // neighbors (both classes); generation is proportional to r_i.
    std::vector<double> r(minority.size(), 0.0);
    double r_sum = 0.0;
    for (std::size_t i = 0; i < minority.size(); ++i) {
        const auto nbrs = knn(d.x, minority[i], cfg.k);
        int majority_count = 0;
        for (Index n : nbrs)
            if (d.y[static_cast<std::size_t>(n)] == 0) ++majority_count;
        r[i] = static_cast<double>(majority_count) / static_cast<double>(cfg.k);
        r_sum += r[i];
    }
    if (r_sum == 0.0) {
        res.warnings.push_back("adasyn: no minority point has majority neighbors; falling back to uniform allocation");
        std::fill(r.begin(), r.end(), 1.0);
        r_sum = static_cast<double>(r.size());
    }

    const std::vector<Index> counts = detail::proportional_allocation(r, total);

    std::vector<std::vector<Index>> neighbor_sets(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i)
        if (counts[i] > 0) neighbor_sets[i] = knn(d.x, minority[i], cfg.k, 1, &d.y);

    Rng rng(derive_seed(cfg.seed, "adasyn"));
    res.data = detail::append_synthetics(d, minority, neighbor_sets, counts, total, cfg, rng);
    res.after = count_classes(res.data);
    return res;
}

// Removes points whose label loses the strict-majority vote of their k
// nearest neighbors. Votes are counted on the input dataset and removals
// applied simultaneously; ties keep the point.
inline ResampleResult enn(const LabeledDataset& d, const ResampleConfig& cfg) {
    ResampleResult res;
    res.before = count_classes(d);
    std::vector<bool> keep(static_cast<std::size_t>(d.size()), true);
    if (d.size() > static_cast<Index>(cfg.k)) {
        for (Index i = 0; i < d.size(); ++i) {
            const auto nbrs = knn(d.x, i, cfg.k);
            int disagree = 0;
            for (Index n : nbrs)
                if (d.y[static_cast<std::size_t>(n)] != d.y[static_cast<std::size_t>(i)]) ++disagree;
            if (2 * disagree > cfg.k) keep[static_cast<std::size_t>(i)] = false;
        }
    }
    Index kept = 0;
    for (bool b : keep) kept += b ? 1 : 0;
    res.data.x.resize(kept, d.x.cols());
    Index row = 0;
    for (Index i = 0; i < d.size(); ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        res.data.x.row(row++) = d.x.row(i);
        res.data.y.push_back(d.y[static_cast<std::size_t>(i)]);
    }
    res.after = count_classes(res.data);
    return res;
}

namespace detail {

// Mutual 1-nearest-neighbor pairs with opposite labels.
inline std::vector<std::pair<Index, Index>> tomek_links(const LabeledDataset& d) {
    std::vector<std::pair<Index, Index>> links;
    if (d.size() < 2) return links;
    std::vector<Index> nn(static_cast<std::size_t>(d.size()));
    for (Index i = 0; i < d.size(); ++i) nn[static_cast<std::size_t>(i)] = knn(d.x, i, 1)[0];
    for (Index a = 0; a < d.size(); ++a) {
        const Index b = nn[static_cast<std::size_t>(a)];
        if (b > a && nn[static_cast<std::size_t>(b)] == a &&
            d.y[static_cast<std::size_t>(a)] != d.y[static_cast<std::size_t>(b)])
            links.emplace_back(a, b);
    }
    return links;
}

inline LabeledDataset drop_rows(const LabeledDataset& d, const std::vector<bool>& drop) {
    LabeledDataset out;
    Index kept = 0;
    for (bool b : drop) kept += b ? 0 : 1;
    out.x.resize(kept, d.x.cols());
    Index row = 0;
    for (Index i = 0; i < d.size(); ++i) {
        if (drop[static_cast<std::size_t>(i)]) continue;
        out.x.row(row++) = d.x.row(i);
        out.y.push_back(d.y[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace detail

// Tomek-link cleaning. In RemoveBoth mode removal is iterated to a fixed
// point, because deleting one link can expose a fresh mutual-NN pair; the
// output is guaranteed link-free. RemoveMajorityOnly performs the classic
// single pass keeping every minority point.
inline ResampleResult tomek_removal(const LabeledDataset& d, const ResampleConfig& cfg) {
    ResampleResult res;
    res.before = count_classes(d);
    res.data = d;
    for (;;) {
        const auto links = detail::tomek_links(res.data);
        if (links.empty()) break;
        std::vector<bool> drop(static_cast<std::size_t>(res.data.size()), false);
        for (const auto& [a, b] : links) {
            if (cfg.tomek_mode == TomekMode::RemoveBoth) {
                drop[static_cast<std::size_t>(a)] = true;
                drop[static_cast<std::size_t>(b)] = true;
            } else {
                const Index majority_member = res.data.y[static_cast<std::size_t>(a)] == 0 ? a : b;
                drop[static_cast<std::size_t>(majority_member)] = true;
            }
        }
        res.data = detail::drop_rows(res.data, drop);
        if (cfg.tomek_mode == TomekMode::RemoveMajorityOnly) break;
    }
    res.after = count_classes(res.data);
    return res;
}

inline ResampleResult resample(const LabeledDataset& d, const ResampleConfig& cfg) {
    switch (cfg.method) {
        case ResampleMethod::None: {
            ResampleResult res;
            res.before = res.after = count_classes(d);
            res.data = d;
            return res;
        }
        case ResampleMethod::Smote: return smote(d, cfg);
        case ResampleMethod::Adasyn: return adasyn(d, cfg);
        case ResampleMethod::Enn: return enn(d, cfg);
        case ResampleMethod::TomekRemoval: return tomek_removal(d, cfg);
        case ResampleMethod::SmoteEnn: {
            ResampleResult first = smote(d, cfg);
            ResampleResult second = enn(first.data, cfg);
            second.before = first.before;
            second.warnings = first.warnings;
            return second;
        }
        case ResampleMethod::SmoteTomek: {
            ResampleResult first = smote(d, cfg);
            ResampleResult second = tomek_removal(first.data, cfg);
            second.before = first.before;
            second.warnings = first.warnings;
            return second;
        }
    }
    fail("resample: unhandled method");
}

}  // namespace accdet
