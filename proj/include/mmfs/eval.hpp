#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/parallel.hpp"
#include "mmfs/select.hpp"

namespace mmfs {

inline constexpr int kKMeansMaxIter = 300;

struct ClusteringRun {
    std::vector<int> predicted;
    std::uint64_t seed = 0;
    double inertia = 0.0;
    int iterations = 0;
};

namespace detail {

inline std::vector<int> assign_nearest(const Matrix& points, const Matrix& centers, Eigen::VectorXd& dist2) {
    const Eigen::Index n = points.rows(), c = centers.rows();
    std::vector<int> labels(static_cast<std::size_t>(n));
    dist2.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index j = 0; j < c; ++j) {
            const double dd = (points.row(i) - centers.row(j)).squaredNorm();
            if (dd < best) {
                best = dd;
                arg = static_cast<int>(j);
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        dist2(i) = best;
    }
    return labels;
}

/// Recomputes centroids. An empty cluster takes over the point farthest from
/// its current center; labels are updated to match.
inline Matrix update_centers(const Matrix& points, std::vector<int>& labels, const Matrix& old_centers) {
    const Eigen::Index n = points.rows(), c = old_centers.rows();
    Matrix centers = Matrix::Zero(c, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(c), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        centers.row(l) += points.row(i);
        ++counts[static_cast<std::size_t>(l)];
    }
    for (Eigen::Index j = 0; j < c; ++j)
        if (counts[static_cast<std::size_t>(j)] > 0) centers.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);

    for (Eigen::Index j = 0; j < c; ++j) {
        if (counts[static_cast<std::size_t>(j)] > 0) continue;
        Eigen::Index far = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(l)] <= 1) continue; // never empty another cluster
            const double dd = (points.row(i) - centers.row(l)).squaredNorm();
            if (dd > far_d) {
                far_d = dd;
                far = i;
            }
        }
        if (far < 0) continue;
        const int from = labels[static_cast<std::size_t>(far)];
        const auto from_n = static_cast<double>(counts[static_cast<std::size_t>(from)]);
        centers.row(from) = (centers.row(from) * from_n - points.row(far)) / (from_n - 1.0);
        --counts[static_cast<std::size_t>(from)];
        labels[static_cast<std::size_t>(far)] = static_cast<int>(j);
        centers.row(j) = points.row(far);
        counts[static_cast<std::size_t>(j)] = 1;
    }
    return centers;
}

} // namespace detail

/// Lloyd's k-means on the rows of `points`. Initial centers are c distinct
/// rows drawn with a generator seeded by `seed`.
inline ClusteringRun kmeans(const Matrix& points, int c, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    detail::require(c >= 1 && c <= n, "cluster count c must satisfy 1 <= c <= N (got c=" + std::to_string(c) +
                                          ", N=" + std::to_string(n) + ")");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int j = 0; j < c; ++j) {
        std::uniform_int_distribution<Eigen::Index> pick(j, n - 1);
        std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    Matrix centers(c, points.cols());
    for (int j = 0; j < c; ++j) centers.row(j) = points.row(idx[static_cast<std::size_t>(j)]);

    ClusteringRun run;
    run.seed = seed;
    Eigen::VectorXd dist2;
    run.predicted = detail::assign_nearest(points, centers, dist2);
    for (int it = 1; it <= kKMeansMaxIter; ++it) {
        run.iterations = it;
        centers = detail::update_centers(points, run.predicted, centers);
        auto next = detail::assign_nearest(points, centers, dist2);
        if (next == run.predicted) break;
        run.predicted = std::move(next);
    }
    centers = detail::update_centers(points, run.predicted, centers);
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        run.inertia += (points.row(i) - centers.row(run.predicted[static_cast<std::size_t>(i)])).squaredNorm();
    return run;
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns row_to_col.
inline std::vector<int> hungarian_assignment(const Matrix& cost) {
    detail::require(cost.rows() == cost.cols(), "assignment cost matrix must be square");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a virtual start node.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) row_to_col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    return row_to_col;
}

namespace detail {

/// Dense 0-based codes for arbitrary integer labels.
inline std::vector<int> encode(const std::vector<int>& labels, int& classes) {
    std::map<int, int> index;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        auto [it, inserted] = index.emplace(l, static_cast<int>(index.size()));
        out.push_back(it->second);
    }
    classes = static_cast<int>(index.size());
    return out;
}

struct Contingency {
    Matrix counts; // pred x truth
    int n = 0;
};

inline Contingency contingency(const std::vector<int>& predicted, const std::vector<int>& truth) {
    require(predicted.size() == truth.size(), "label vectors differ in length (" + std::to_string(predicted.size()) +
                                                  " vs " + std::to_string(truth.size()) + ")");
    require(!predicted.empty(), "label vectors must be non-empty");
    int cp = 0, ct = 0;
    const auto p = encode(predicted, cp);
    const auto t = encode(truth, ct);
    Contingency c{Matrix::Zero(cp, ct), static_cast<int>(predicted.size())};
    for (std::size_t i = 0; i < p.size(); ++i) c.counts(p[i], t[i]) += 1.0;
    return c;
}

} // namespace detail

/// Clustering accuracy under the best one-to-one cluster/class mapping.
inline double hungarian_acc(const std::vector<int>& predicted, const std::vector<int>& truth) {
    const auto c = detail::contingency(predicted, truth);
    const Eigen::Index m = std::max(c.counts.rows(), c.counts.cols());
    Matrix cost = Matrix::Zero(m, m);
    cost.topLeftCorner(c.counts.rows(), c.counts.cols()) = -c.counts;
    const auto assign = hungarian_assignment(cost);
    double matched = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) matched -= cost(r, assign[static_cast<std::size_t>(r)]);
    return matched / static_cast<double>(c.n);
}

enum class NmiNorm { Arithmetic, Geometric };

/// Normalised mutual information with natural logs.
inline double nmi(const std::vector<int>& predicted, const std::vector<int>& truth,
                  NmiNorm norm = NmiNorm::Arithmetic) {
    const auto c = detail::contingency(predicted, truth);
    const double n = c.n;
    const Vector rows = c.counts.rowwise().sum();
    const Vector cols = c.counts.colwise().sum().transpose();
    auto entropy = [n](const Vector& v) {
        double h = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (v(i) > 0) h -= v(i) / n * std::log(v(i) / n);
        return h;
    };
    const double hp = entropy(rows), ht = entropy(cols);
    double mi = 0.0;
    for (Eigen::Index i = 0; i < c.counts.rows(); ++i)
        for (Eigen::Index j = 0; j < c.counts.cols(); ++j) {
            const double nij = c.counts(i, j);
            if (nij > 0) mi += nij / n * std::log(n * nij / (rows(i) * cols(j)));
        }
    // both partitions trivial: identical up to relabeling
    if (c.counts.rows() == 1 && c.counts.cols() == 1) return 1.0;
    if (hp <= 0.0 || ht <= 0.0) return 0.0;
    const double denom = norm == NmiNorm::Arithmetic ? 0.5 * (hp + ht) : std::sqrt(hp * ht);
    return std::clamp(mi / denom, 0.0, 1.0);
}

struct SubsetScore {
    double acc_mean = 0.0, acc_std = 0.0; // percent
    double nmi_mean = 0.0, nmi_std = 0.0; // percent
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size()));
}

} // namespace detail

/// k-means on the selected features, `repeats` times with seeds
/// base_seed, base_seed+1, ...; mean and population std in percent.
inline SubsetScore evaluate_subset(const DataMatrix& X, const std::vector<std::size_t>& selected,
                                   const std::vector<int>& truth, int c, int repeats, std::uint64_t base_seed,
                                   int jobs = 1, NmiNorm norm = NmiNorm::Arithmetic) {
    detail::require(!selected.empty(), "selected feature list must be non-empty");
    detail::require(repeats >= 1, "repeats must be >= 1");
    detail::require(truth.size() == static_cast<std::size_t>(X.instances()), "one label per instance required");
    const Matrix points = X.subset(selected).values().transpose();

    std::vector<double> acc(static_cast<std::size_t>(repeats)), nm(static_cast<std::size_t>(repeats));
    parallel_for(static_cast<std::size_t>(repeats), jobs, [&](std::size_t r) {
        const auto run = kmeans(points, c, base_seed + r);
        acc[r] = 100.0 * hungarian_acc(run.predicted, truth);
        nm[r] = 100.0 * nmi(run.predicted, truth, norm);
    });
    SubsetScore s;
    detail::mean_std(acc, s.acc_mean, s.acc_std);
    detail::mean_std(nm, s.nmi_mean, s.nmi_std);
    return s;
}

struct EvalReport {
    Variant variant = Variant::MaxP;
    std::vector<std::size_t> feature_counts;
    std::vector<double> acc_mean, acc_std, nmi_mean, nmi_std; // percent
    int repeats = 0;
};

/// Feature-count grid {50, 100, ..., 300}; {50, 80, ..., 200} when d = 256.
/// Counts larger than d are dropped.
inline std::vector<std::size_t> default_feature_counts(std::size_t d) {
    std::vector<std::size_t> grid;
    if (d == 256) {
        for (std::size_t s = 50; s <= 200; s += 30) grid.push_back(s);
    } else {
        for (std::size_t s = 50; s <= 300; s += 50) grid.push_back(s);
    }
    std::erase_if(grid, [d](std::size_t s) { return s > d; });
    return grid;
}

struct SweepOptions {
    int repeats = 20;
    std::uint64_t base_seed = 0;
    int jobs = 1;
    NmiNorm norm = NmiNorm::Arithmetic;
};

/// Full rankings for a variant: selection runs once, every count is a prefix
/// (for inter, the combination is rebuilt from both prefixes at each count).
struct VariantRankings {
    Variant variant = Variant::MaxP;
    SelectionResult min_result, max_result;

    SelectionResult at(std::size_t s) const {
        switch (variant) {
        case Variant::MinP: return truncate(min_result, s);
        case Variant::MaxP: return truncate(max_result, s);
        case Variant::Inter: return select_inter(truncate(min_result, s), truncate(max_result, s), s);
        }
        return {};
    }
};

inline VariantRankings rank_variant(const DataMatrix& X, const MmfsParams& params, Variant variant) {
    VariantRankings r;
    r.variant = variant;
    if (variant != Variant::MaxP)
        r.min_result = selection_from_weights(fit_mmfs(X, params, ReachVariant::Min).solver.W, Variant::MinP, 1);
    if (variant != Variant::MinP)
        r.max_result = selection_from_weights(fit_mmfs(X, params, ReachVariant::Max).solver.W, Variant::MaxP, 1);
    return r;
}

inline EvalReport benchmark_sweep(const LabeledDataset& dataset, Variant variant,
                                  const std::vector<std::size_t>& feature_counts, const MmfsParams& params,
                                  const SweepOptions& opts) {
    detail::require(dataset.labels.has_value(), "benchmark sweep needs a labeled dataset");
    detail::require(!feature_counts.empty(), "feature count list is empty");
    const auto d = static_cast<std::size_t>(dataset.data.features());
    for (auto s : feature_counts)
        detail::require(s >= 1 && s <= d, "feature count " + std::to_string(s) + " exceeds d=" + std::to_string(d));

    const auto rankings = rank_variant(dataset.data, params, variant);
    const int c = static_cast<int>(dataset.labels->class_count());

    EvalReport rep;
    rep.variant = variant;
    rep.repeats = opts.repeats;
    rep.feature_counts = feature_counts;
    for (auto s : feature_counts) {
        const auto sel = rankings.at(s);
        const auto score = evaluate_subset(dataset.data, sel.selected, dataset.labels->ids, c, opts.repeats,
                                           opts.base_seed, opts.jobs, opts.norm);
        rep.acc_mean.push_back(score.acc_mean);
        rep.acc_std.push_back(score.acc_std);
        rep.nmi_mean.push_back(score.nmi_mean);
        rep.nmi_std.push_back(score.nmi_std);
    }
    return rep;
}

} // namespace mmfs
