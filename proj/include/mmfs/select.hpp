#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/markov.hpp"
#include "mmfs/solver.hpp"

namespace mmfs {

enum class Variant { MinP, MaxP, Inter };

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::MinP: return "minP";
    case Variant::MaxP: return "maxP";
    case Variant::Inter: return "inter";
    }
    return "?";
}

/// Everything that shapes the selection besides the data and s.
struct MmfsParams {
    int k = 5;
    double alpha = 1e-6;
    int n = 10;
    DistanceDenominator denominator = DistanceDenominator::Neighbors;
    SolverConfig solver;
    /// Fold P^t into running min/max instead of keeping all n powers.
    /// Switched on automatically when the power list would exceed
    /// kPowerListBudgetBytes.
    bool low_memory = false;

    void validate(Eigen::Index N) const {
        detail::require(k >= 1 && k <= N - 1, "k must satisfy 1 <= k <= N-1 (got k=" + std::to_string(k) +
                                                  ", N=" + std::to_string(N) + ")");
        detail::require(alpha > 0.0, "alpha must be > 0");
        detail::require(n >= 1, "n must be >= 1");
        solver.validate();
    }
};

inline constexpr double kPowerListBudgetBytes = 1024.0 * 1024.0 * 1024.0;

struct SelectionResult {
    Vector scores;                    // |W^i|_2 per feature
    std::vector<std::size_t> ranking; // permutation of 0..d-1
    std::vector<std::size_t> selected;
    std::size_t s = 0;
    Variant variant = Variant::MaxP;
};

/// Intermediate products of one MMFS fit, kept for dumps and projections.
struct MmfsFit {
    TransitionMatrix P;
    ReachabilityMatrix V; // row-normalised
    Template F;
    SolverState solver;
};

inline Vector feature_scores(const Matrix& W) { return W.rowwise().norm(); }

/// Stable order by score; equal scores keep ascending feature index.
inline std::vector<std::size_t> rank_features(const Vector& scores, bool ascending) {
    std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = scores(static_cast<Eigen::Index>(a)), sb = scores(static_cast<Eigen::Index>(b));
        return ascending ? sa < sb : sa > sb;
    });
    return order;
}

inline TransitionMatrix transition_model(const DataMatrix& X, const MmfsParams& params) {
    params.validate(X.instances());
    const auto D = pairwise_distances(X);
    const auto G = knn_mask(D, params.k);
    return one_step_transition(D, G, params.alpha, params.denominator);
}

namespace detail {

inline bool use_low_memory(const MmfsParams& params, Eigen::Index N) {
    const double bytes = static_cast<double>(params.n) * static_cast<double>(N) * static_cast<double>(N) * 8.0;
    return params.low_memory || bytes > kPowerListBudgetBytes;
}

} // namespace detail

/// Row-normalised reachability matrix for a single horizon.
inline ReachabilityMatrix reachability_template(const TransitionMatrix& P, const MmfsParams& params,
                                                ReachVariant variant) {
    const Eigen::Index N = P.values.rows();
    if (!detail::use_low_memory(params, N)) {
        const auto powers = multi_step_transitions(P, params.n);
        return row_normalize(variant == ReachVariant::Min ? min_reachability(powers, params.n)
                                                          : max_reachability(powers, params.n));
    }
    ReachabilityAccumulator acc(N);
    Matrix power = P.values;
    for (int t = 1; t <= params.n; ++t) {
        if (t > 1) power = (power * P.values).eval();
        acc.add(power);
    }
    return row_normalize(acc.snapshot(variant));
}

/// Normalised min and max reachability at each requested horizon, from one
/// pass of matrix powers up to the largest horizon.
struct HorizonTemplates {
    int horizon = 0;
    ReachabilityMatrix v_min;
    ReachabilityMatrix v_max;
};

inline std::vector<HorizonTemplates> reachability_at_horizons(const TransitionMatrix& P, std::vector<int> horizons) {
    detail::require(!horizons.empty(), "horizon list must be non-empty");
    std::sort(horizons.begin(), horizons.end());
    horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
    detail::require(horizons.front() >= 1, "horizons must be >= 1");

    std::vector<HorizonTemplates> out;
    ReachabilityAccumulator acc(P.values.rows());
    Matrix power = P.values;
    std::size_t next = 0;
    for (int t = 1; t <= horizons.back(); ++t) {
        if (t > 1) power = (power * P.values).eval();
        acc.add(power);
        if (t == horizons[next]) {
            out.push_back({t, row_normalize(acc.snapshot(ReachVariant::Min)),
                           row_normalize(acc.snapshot(ReachVariant::Max))});
            ++next;
        }
    }
    return out;
}

inline MmfsFit fit_mmfs(const DataMatrix& X, const MmfsParams& params, ReachVariant variant) {
    MmfsFit fit;
    fit.P = transition_model(X, params);
    fit.V = reachability_template(fit.P, params, variant);
    fit.F = build_template(fit.V, X);
    fit.solver = solve_irls(X, fit.F, params.solver);
    return fit;
}

/// Ranks by |W^i|_2: ascending for minP, descending for maxP.
inline SelectionResult selection_from_weights(const Matrix& W, Variant variant, std::size_t s) {
    detail::require(variant != Variant::Inter, "inter selections are built with select_inter");
    const auto d = static_cast<std::size_t>(W.rows());
    detail::require(s >= 1 && s <= d, "s must satisfy 1 <= s <= d (got s=" + std::to_string(s) +
                                          ", d=" + std::to_string(d) + ")");
    SelectionResult r;
    r.scores = feature_scores(W);
    r.ranking = rank_features(r.scores, variant == Variant::MinP);
    r.selected.assign(r.ranking.begin(), r.ranking.begin() + static_cast<std::ptrdiff_t>(s));
    r.s = s;
    r.variant = variant;
    return r;
}

/// Same ranking, first s entries selected.
inline SelectionResult truncate(const SelectionResult& r, std::size_t s) {
    detail::require(s >= 1 && s <= r.ranking.size(), "s out of range");
    SelectionResult out = r;
    out.s = s;
    out.selected.assign(r.ranking.begin(), r.ranking.begin() + static_cast<std::ptrdiff_t>(s));
    return out;
}

inline SelectionResult select_minP(const DataMatrix& X, const MmfsParams& params, std::size_t s) {
    detail::require(s >= 1 && s <= static_cast<std::size_t>(X.features()), "s must satisfy 1 <= s <= d");
    const auto fit = fit_mmfs(X, params, ReachVariant::Min);
    return selection_from_weights(fit.solver.W, Variant::MinP, s);
}

inline SelectionResult select_maxP(const DataMatrix& X, const MmfsParams& params, std::size_t s) {
    detail::require(s >= 1 && s <= static_cast<std::size_t>(X.features()), "s must satisfy 1 <= s <= d");
    const auto fit = fit_mmfs(X, params, ReachVariant::Max);
    return selection_from_weights(fit.solver.W, Variant::MaxP, s);
}

/// Combines the two selections: their intersection first (by maxP score),
/// then the remaining s - s1 slots filled alternately from the maxP and minP
/// rankings (maxP takes the odd one), skipping features already chosen.
/// The output ranking continues with the rest of the maxP ranking.
inline SelectionResult select_inter(const SelectionResult& result_min, const SelectionResult& result_max,
                                    std::size_t s) {
    const std::size_t d = result_max.ranking.size();
    detail::require(result_min.variant == Variant::MinP && result_max.variant == Variant::MaxP,
                    "select_inter expects a minP and a maxP result");
    detail::require(result_min.ranking.size() == d && static_cast<std::size_t>(result_min.scores.size()) == d &&
                        static_cast<std::size_t>(result_max.scores.size()) == d,
                    "minP and maxP results have different feature counts");
    detail::require(result_min.s == s && result_max.s == s, "both results must select s features");
    detail::require(s >= 1 && s <= d, "s out of range");

    std::unordered_set<std::size_t> in_min(result_min.selected.begin(), result_min.selected.end());
    std::vector<std::size_t> picked;
    for (auto f : result_max.selected)
        if (in_min.count(f)) picked.push_back(f);
    // result_max.selected is already in maxP order
    if (picked.size() > s) picked.resize(s);

    std::vector<char> used(d, 0);
    for (auto f : picked) used[f] = 1;

    const std::size_t rest = s - picked.size();
    std::size_t want_max = (rest + 1) / 2;
    std::size_t want_min = rest / 2;
    std::size_t cur_max = 0, cur_min = 0;
    auto take_next = [&](const std::vector<std::size_t>& ranking, std::size_t& cursor) {
        while (cursor < d && used[ranking[cursor]]) ++cursor;
        if (cursor == d) return false;
        used[ranking[cursor]] = 1;
        picked.push_back(ranking[cursor]);
        return true;
    };
    bool max_turn = true;
    while (picked.size() < s) {
        if (max_turn && want_max > 0) {
            if (take_next(result_max.ranking, cur_max)) --want_max;
            else want_max = 0;
        } else if (!max_turn && want_min > 0) {
            if (take_next(result_min.ranking, cur_min)) --want_min;
            else want_min = 0;
        } else if (want_max == 0 && want_min == 0) {
            // only reachable when one list is exhausted; top up from the other
            if (!take_next(result_max.ranking, cur_max)) take_next(result_min.ranking, cur_min);
        }
        max_turn = !max_turn;
    }

    SelectionResult out;
    out.scores = result_max.scores;
    out.selected = picked;
    out.ranking = picked;
    for (auto f : result_max.ranking)
        if (!used[f]) out.ranking.push_back(f);
    out.s = s;
    out.variant = Variant::Inter;
    return out;
}

} // namespace mmfs
