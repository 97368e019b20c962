#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/markov.hpp"

namespace mmfs {

/// Squared: lambda * (sum_j sqrt(|W^j|^2 + eps))^2.
/// Plain:   lambda * sum_j sqrt(|W^j|^2 + eps).
enum class Penalty { Squared, Plain };

struct SolverConfig {
    double lambda = 1.0;
    double epsilon = 1e-8;
    double tol = 1e-6;
    int max_iter = 100;
    Penalty penalty = Penalty::Squared;

    void validate() const {
        detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
        detail::require(epsilon > 0.0, "epsilon must be > 0");
        detail::require(tol > 0.0, "tol must be > 0");
        detail::require(max_iter >= 1, "max_iter must be >= 1");
    }
};

struct SolverState {
    Matrix W;                              // d x d
    Vector q;                              // reweighting diagonal used for the last W update
    std::vector<double> objective_trace;   // one entry per W update
    std::vector<double> delta_w_trace;     // |W_t - W_{t-1}|_F, first entry |W_1|_F
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Vector smoothed_row_norms(const Matrix& W, double epsilon) {
    return (W.rowwise().squaredNorm().array() + epsilon).sqrt().matrix();
}

inline void check_shapes(const DataMatrix& X, const Matrix& W, const Template& F) {
    const auto d = X.features(), n = X.instances();
    require(W.rows() == d && W.cols() == F.values.cols(), "W must be d x d");
    require(F.values.rows() == n && F.values.cols() == d,
            "template must be N x d (got " + std::to_string(F.values.rows()) + "x" +
                std::to_string(F.values.cols()) + ")");
}

} // namespace detail

/// Smoothed objective |X^T W - F|_F^2 + penalty(W).
inline double objective(const DataMatrix& X, const Matrix& W, const Template& F, double lambda, double epsilon,
                        Penalty penalty = Penalty::Squared) {
    detail::check_shapes(X, W, F);
    const double fit = (X.values().transpose() * W - F.values).squaredNorm();
    const double s = detail::smoothed_row_norms(W, epsilon).sum();
    return fit + lambda * (penalty == Penalty::Squared ? s * s : s);
}

/// Diagonal of the reweighting matrix for the current W.
inline Vector update_Q(const Matrix& W, double epsilon, Penalty penalty = Penalty::Squared) {
    detail::require(epsilon > 0.0, "epsilon must be > 0");
    const Vector norms = detail::smoothed_row_norms(W, epsilon);
    if (penalty == Penalty::Plain) return (0.5 / norms.array()).matrix();
    return (norms.sum() / norms.array()).matrix();
}

/// Gradient of the reweighted quadratic with q frozen:
/// 2 X (X^T W - F) + 2 lambda diag(q) W.
inline Matrix objective_gradient(const DataMatrix& X, const Matrix& W, const Template& F, double lambda,
                                 const Vector& q) {
    detail::check_shapes(X, W, F);
    const auto& x = X.values();
    return 2.0 * x * (x.transpose() * W - F.values) + 2.0 * lambda * (q.asDiagonal() * W);
}

namespace detail {

inline void require_full_rank(const Matrix& x) {
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < x.rows())
        throw SingularSystemError("lambda = 0 requires X X^T to be nonsingular, but X has rank " +
                                  std::to_string(qr.rank()) + " < d = " + std::to_string(x.rows()) +
                                  " (rank-deficient data)");
}

/// Solves (gram + lambda diag(q)) W = rhs by Cholesky.
inline Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs, const Vector& q, double lambda) {
    Matrix A = gram;
    A.diagonal() += lambda * q;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success)
        throw SingularSystemError("X X^T + lambda Q is not positive definite (rank-deficient system)");
    return llt.solve(rhs);
}

} // namespace detail

/// W = (X X^T + lambda Q)^{-1} X F, computed by an SPD solve.
inline Matrix update_W(const DataMatrix& X, const Template& F, const Vector& q, double lambda) {
    const auto& x = X.values();
    detail::require(F.values.rows() == x.cols() && F.values.cols() == x.rows(), "template must be N x d");
    detail::require(q.size() == x.rows(), "Q diagonal must have d entries");
    detail::require(lambda >= 0.0, "lambda must be >= 0");
    if (lambda == 0.0) detail::require_full_rank(x);
    const Matrix gram = x * x.transpose();
    const Matrix rhs = x * F.values;
    return detail::solve_normal_equations(gram, rhs, q, lambda);
}

/// Alternates W and Q updates starting from Q = I until the relative
/// objective change or the relative step |dW|/|W| drops below tol.
inline SolverState solve_irls(const DataMatrix& X, const Template& F, const SolverConfig& config) {
    config.validate();
    const auto& x = X.values();
    const Eigen::Index d = x.rows();
    detail::require(F.values.rows() == x.cols() && F.values.cols() == d, "template must be N x d");
    if (config.lambda == 0.0) detail::require_full_rank(x);

    const Matrix gram = x * x.transpose();
    const Matrix rhs = x * F.values;

    SolverState st;
    st.q = Vector::Ones(d);
    Matrix W_prev = Matrix::Zero(d, d);
    double obj_prev = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= config.max_iter; ++it) {
        Matrix W = detail::solve_normal_equations(gram, rhs, st.q, config.lambda);
        const double obj = objective(X, W, F, config.lambda, config.epsilon, config.penalty);
        const double dw = (W - W_prev).norm();
        st.objective_trace.push_back(obj);
        st.delta_w_trace.push_back(dw);
        st.iterations = it;
        st.W = std::move(W);

        // Q has no effect on the solve without regularisation.
        if (config.lambda == 0.0) {
            st.converged = true;
            break;
        }
        if (it > 1) {
            const double rel_obj = std::abs(obj_prev - obj) / std::max(std::abs(obj_prev), 1e-300);
            const double wn = st.W.norm();
            const double rel_w = wn > 0.0 ? dw / wn : 0.0;
            if (rel_obj < config.tol || rel_w < config.tol) {
                st.converged = true;
                break;
            }
        }
        obj_prev = obj;
        W_prev = st.W;
        st.q = update_Q(st.W, config.epsilon, config.penalty);
    }
    return st;
}

} // namespace mmfs
