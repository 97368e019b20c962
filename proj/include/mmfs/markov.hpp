#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"

namespace mmfs {

/// Entries at or below this are treated as "not reachable at this step".
inline constexpr double kReachableThreshold = 1e-15;

/// Which points the distance normaliser of the one-step kernel sums over.
enum class DistanceDenominator { Neighbors, All };

enum class ReachVariant { Min, Max };

struct DistanceMatrix {
    Matrix values; // N x N, symmetric, zero diagonal
};

/// Directed kNN graph. neighbors[i] is sorted by ascending distance, ties by
/// ascending index, and never contains i.
struct NeighborGraph {
    std::vector<std::vector<Eigen::Index>> neighbors;
    int k = 0;
};

struct TransitionMatrix {
    Matrix values; // row-stochastic, zero diagonal
    double alpha = 0.0;
};

struct ReachabilityMatrix {
    Matrix values;
    ReachVariant variant = ReachVariant::Min;
    int horizon = 0;
    bool normalized = false;
    /// Rows that were all zero when normalized (left as zeros).
    std::vector<Eigen::Index> zero_rows;
};

/// N x d structure template V * X^T.
struct Template {
    Matrix values;
};

inline DistanceMatrix pairwise_distances(const DataMatrix& X) {
    const auto& v = X.values();
    const Eigen::Index n = v.cols();
    DistanceMatrix D{Matrix::Zero(n, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double dist = (v.col(i) - v.col(j)).norm();
            D.values(i, j) = dist;
            D.values(j, i) = dist;
        }
    }
    return D;
}

inline NeighborGraph knn_mask(const DistanceMatrix& D, int k) {
    const Eigen::Index n = D.values.rows();
    detail::require(k >= 1 && k <= n - 1, "k must satisfy 1 <= k <= N-1 (got k=" + std::to_string(k) +
                                              ", N=" + std::to_string(n) + ")");
    NeighborGraph G;
    G.k = k;
    G.neighbors.resize(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        auto closer = [&](Eigen::Index a, Eigen::Index b) {
            const double da = D.values(i, a), db = D.values(i, b);
            return da < db || (da == db && a < b);
        };
        std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
        G.neighbors[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
    }
    return G;
}

/// One-step transition probabilities over the kNN graph. Distances are
/// normalised per row, mapped to 1/(r + alpha) and rescaled to sum to one.
inline TransitionMatrix one_step_transition(const DistanceMatrix& D, const NeighborGraph& G, double alpha,
                                            DistanceDenominator denominator = DistanceDenominator::Neighbors) {
    detail::require(alpha > 0.0, "alpha must be positive");
    const Eigen::Index n = D.values.rows();
    detail::require(G.neighbors.size() == static_cast<std::size_t>(n), "neighbor graph does not match distances");

    TransitionMatrix P{Matrix::Zero(n, n), alpha};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nbrs = G.neighbors[static_cast<std::size_t>(i)];
        double scale = 0.0;
        if (denominator == DistanceDenominator::Neighbors) {
            for (auto j : nbrs) scale += D.values(i, j);
        } else {
            scale = D.values.row(i).sum();
        }
        double total = 0.0;
        for (auto j : nbrs) {
            // all neighbours coincide with i: every r is 0
            const double r = scale > 0.0 ? D.values(i, j) / scale : 0.0;
            const double m = 1.0 / (r + alpha);
            P.values(i, j) = m;
            total += m;
        }
        P.values.row(i) /= total;
        P.values(i, i) = 0.0;
    }
    return P;
}

/// [P, P^2, ..., P^n], each computed as the previous power times P.
inline std::vector<Matrix> multi_step_transitions(const TransitionMatrix& P, int n) {
    detail::require(n >= 1, "step count n must be >= 1");
    std::vector<Matrix> powers;
    powers.reserve(static_cast<std::size_t>(n));
    powers.push_back(P.values);
    for (int t = 1; t < n; ++t) {
        Matrix next(P.values.rows(), P.values.cols());
        next.noalias() = powers.back() * P.values;
        powers.push_back(std::move(next));
    }
    return powers;
}

/// Running entrywise min (over reachable entries) and max of successive
/// transition powers. Lets callers fold P^t one at a time instead of
/// materialising the whole list, and snapshot at several horizons.
class ReachabilityAccumulator {
public:
    explicit ReachabilityAccumulator(Eigen::Index n)
        : min_(Matrix::Zero(n, n)), max_(Matrix::Zero(n, n)) {}

    void add(const Matrix& power) {
        detail::require(power.rows() == min_.rows() && power.cols() == min_.cols(),
                        "transition power has the wrong shape");
        const Eigen::Index n = min_.rows();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double p = power(i, j);
                if (p <= kReachableThreshold) continue;
                double& lo = min_(i, j);
                if (lo == 0.0 || p < lo) lo = p;
                if (p > max_(i, j)) max_(i, j) = p;
            }
        }
        ++steps_;
    }

    int steps() const noexcept { return steps_; }

    ReachabilityMatrix snapshot(ReachVariant variant) const {
        ReachabilityMatrix V{variant == ReachVariant::Min ? min_ : max_, variant, steps_, false, {}};
        V.values.diagonal().setZero();
        return V;
    }

private:
    Matrix min_;
    Matrix max_;
    int steps_ = 0;
};

namespace detail {

inline ReachabilityMatrix reachability(const std::vector<Matrix>& powers, int horizon, ReachVariant variant) {
    require(horizon >= 1, "horizon must be >= 1");
    require(powers.size() == static_cast<std::size_t>(horizon), "powers list length must equal the horizon");
    ReachabilityAccumulator acc(powers.front().rows());
    for (const auto& p : powers) acc.add(p);
    return acc.snapshot(variant);
}

} // namespace detail

/// Per pair, the smallest positive P^t entry over t = 1..n (zero if never
/// reachable); zero diagonal.
inline ReachabilityMatrix min_reachability(const std::vector<Matrix>& powers, int horizon) {
    return detail::reachability(powers, horizon, ReachVariant::Min);
}

/// Per pair, the largest P^t entry over t = 1..n; zero diagonal.
inline ReachabilityMatrix max_reachability(const std::vector<Matrix>& powers, int horizon) {
    return detail::reachability(powers, horizon, ReachVariant::Max);
}

inline ReachabilityMatrix row_normalize(const ReachabilityMatrix& V) {
    ReachabilityMatrix out = V;
    out.zero_rows.clear();
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        const double s = out.values.row(i).sum();
        if (s > 0.0)
            out.values.row(i) /= s;
        else
            out.zero_rows.push_back(i);
    }
    out.normalized = true;
    return out;
}

inline Template build_template(const ReachabilityMatrix& V, const DataMatrix& X) {
    const auto& x = X.values();
    detail::require(V.values.rows() == V.values.cols() && V.values.cols() == x.cols(),
                    "template: reachability matrix is " + std::to_string(V.values.rows()) + "x" +
                        std::to_string(V.values.cols()) + " but data has N=" + std::to_string(x.cols()));
    Template F;
    F.values.noalias() = V.values * x.transpose();
    return F;
}

} // namespace mmfs
