#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mmfs/solver.hpp"
#include "naive_oracle.hpp"
#include "test_util.hpp"

namespace {

using mmfs::Matrix;
using mmfs::Vector;

Matrix parse_rowmajor(const std::string& csv, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    std::stringstream ss(csv);
    std::string cell;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            std::getline(ss, cell, ',');
            m(i, j) = std::stod(cell);
        }
    return m;
}

// 6x10 instance written out by tests/oracles/mmfs_reference.py solver
const char* kX6x10 =
    "0.304717,-1.039984,0.750451,0.940565,-1.951035,-1.30218,0.12784,-0.316243,-0.016801,-0.853044,0.879398,"
    "0.777792,0.066031,1.127241,0.467509,-0.859292,0.368751,-0.958883,0.87845,-0.049926,-0.184862,-0.68093,"
    "1.222541,-0.154529,-0.428328,-0.352134,0.532309,0.365444,0.412733,0.430821,2.141648,-0.406415,-0.512243,"
    "-0.813773,0.615979,1.128972,-0.113947,-0.840156,-0.824481,0.650593,0.743254,0.543154,-0.66551,0.232161,"
    "0.116686,0.218689,0.871429,0.223596,0.678914,0.067579,0.289119,0.631288,-1.457156,-0.319671,-0.470373,"
    "-0.638878,-0.275142,1.494941,-0.865831,0.968278";
const char* kF10x6 =
    "-1.68287,-0.334885,0.162753,0.586222,0.711227,0.793347,-0.348725,-0.462352,0.857976,-0.191304,-1.275686,"
    "-1.133287,-0.919452,0.497161,0.142426,0.690485,-0.427253,0.15854,0.62559,-0.309347,0.456775,-0.661926,"
    "-0.363054,-0.381738,-1.19584,0.486972,-0.469402,0.012494,0.480747,0.446531,0.665385,-0.098485,-0.423298,"
    "-0.079718,-1.687334,-1.447112,-1.3227,-0.997247,0.399774,-0.905479,-0.378163,1.299228,-0.356264,0.737516,"
    "-0.933618,-0.205438,-0.950022,-0.339033,0.840308,-1.72732,0.434424,0.237736,-0.59415,-1.446058,0.07213,"
    "-0.529493,0.232676,0.021852,1.601779,-0.239356";

TEST(Objective, ExactFitAndZeroWeights) {
    std::mt19937_64 rng(1);
    const auto X = testutil::random_data(rng, 3, 3);
    const mmfs::Template F{X.values().transpose()};
    EXPECT_NEAR(mmfs::objective(X, Matrix::Identity(3, 3), F, 0.0, 1e-8), 0.0, 1e-24);

    const double eps = 1e-4, lambda = 2.5;
    const double expected = F.values.squaredNorm() + lambda * std::pow(3 * std::sqrt(eps), 2);
    EXPECT_NEAR(mmfs::objective(X, Matrix::Zero(3, 3), F, lambda, eps), expected, 1e-12);
}

TEST(Objective, MatchesScalarLoops) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 5; ++t) {
        const auto X = testutil::random_data(rng, 4, 7);
        const Matrix W = testutil::random_matrix(rng, 4, 4);
        const mmfs::Template F{testutil::random_matrix(rng, 7, 4)};
        const double ref = naive::objective(testutil::to_naive(X.values()), testutil::to_naive(W),
                                            testutil::to_naive(F.values), 0.7, 1e-3);
        EXPECT_NEAR(mmfs::objective(X, W, F, 0.7, 1e-3), ref, 1e-10 * ref);
    }
}

TEST(Objective, ShapeMismatch) {
    std::mt19937_64 rng(3);
    const auto X = testutil::random_data(rng, 3, 5);
    EXPECT_THROW(mmfs::objective(X, Matrix::Zero(3, 3), mmfs::Template{Matrix::Zero(4, 3)}, 1, 1e-8),
                 mmfs::PreconditionError);
}

TEST(UpdateQ, ClosedForms) {
    Matrix W(3, 2);
    W << 1, 0, 0, 1, -1, 0;
    EXPECT_LE((mmfs::update_Q(W, 1e-8) - Vector::Constant(3, 3.0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mmfs::update_Q(Matrix::Zero(4, 4), 1e-8) - Vector::Constant(4, 4.0)).cwiseAbs().maxCoeff(), 1e-12);

    Matrix W2(2, 2);
    W2 << 1, std::sqrt(2.0), 0, 0; // row norms sqrt(3), 0
    const Vector q = mmfs::update_Q(W2, 1.0);
    EXPECT_NEAR(q(0), 1.5, 1e-15);
    EXPECT_NEAR(q(1), 3.0, 1e-15);
}

TEST(UpdateQ, AtLeastOne) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        Matrix W = testutil::random_matrix(rng, 6, 6, 10.0);
        W.row(t % 6).setZero();
        const Vector q = mmfs::update_Q(W, 1e-8);
        EXPECT_TRUE(q.allFinite());
        EXPECT_GE(q.minCoeff(), 1.0);
    }
}

TEST(UpdateW, SelfReconstruction) {
    std::mt19937_64 rng(5);
    const auto X = testutil::random_data(rng, 4, 4);
    const Matrix W = mmfs::update_W(X, mmfs::Template{X.values().transpose()}, Vector::Ones(4), 0.0);
    EXPECT_LE((W - Matrix::Identity(4, 4)).norm(), 1e-9);
}

TEST(UpdateW, ShrinksWithLambda) {
    std::mt19937_64 rng(6);
    const auto X = testutil::random_data(rng, 5, 8);
    const mmfs::Template F{testutil::random_matrix(rng, 8, 5)};
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-3, 1.0, 1e3}) {
        const double n = mmfs::update_W(X, F, Vector::Ones(5), lambda).norm();
        EXPECT_LT(n, prev);
        prev = n;
    }
}

TEST(UpdateW, NormalEquationResidual) {
    std::mt19937_64 rng(7);
    const auto X = testutil::random_data(rng, 5, 8);
    const mmfs::Template F{testutil::random_matrix(rng, 8, 5)};
    const Matrix W = mmfs::update_W(X, F, Vector::Ones(5), 0.1);
    const Matrix& x = X.values();
    const Matrix A = x * x.transpose() + 0.1 * Matrix::Identity(5, 5);
    EXPECT_LE((A * W - x * F.values).norm(), 1e-10);
}

TEST(UpdateW, RankDeficientWithoutRegularisation) {
    std::mt19937_64 rng(8);
    Matrix v = testutil::random_matrix(rng, 4, 6);
    v.row(3) = v.row(0) + v.row(1);
    const mmfs::DataMatrix X(v);
    const mmfs::Template F{testutil::random_matrix(rng, 6, 4)};
    try {
        mmfs::update_W(X, F, Vector::Ones(4), 0.0);
        FAIL() << "expected SingularSystemError";
    } catch (const mmfs::SingularSystemError& e) {
        EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
    }
    mmfs::SolverConfig cfg;
    cfg.lambda = 0.0;
    EXPECT_THROW(mmfs::solve_irls(X, F, cfg), mmfs::SingularSystemError);
    // any lambda > 0 makes the system definite
    EXPECT_NO_THROW(mmfs::update_W(X, F, Vector::Ones(4), 1e-3));
}

TEST(SolveIrls, LambdaZeroIsLeastSquares) {
    std::mt19937_64 rng(9);
    const auto X = testutil::random_data(rng, 5, 12);
    const mmfs::Template F{testutil::random_matrix(rng, 12, 5)};
    mmfs::SolverConfig cfg;
    cfg.lambda = 0.0;
    const auto st = mmfs::solve_irls(X, F, cfg);
    EXPECT_TRUE(st.converged);
    EXPECT_EQ(st.iterations, 1);
    const Matrix ls = X.values().transpose().colPivHouseholderQr().solve(F.values);
    EXPECT_LE((st.W - ls).norm(), 1e-8);
}

TEST(SolveIrls, MatchesFrozenReference) {
    const mmfs::DataMatrix X(parse_rowmajor(kX6x10, 6, 10));
    const mmfs::Template F{parse_rowmajor(kF10x6, 10, 6)};
    mmfs::SolverConfig cfg;
    cfg.lambda = 1.0;
    const auto st = mmfs::solve_irls(X, F, cfg);
    EXPECT_TRUE(st.converged);
    EXPECT_EQ(st.iterations, 18);
    EXPECT_NEAR(st.objective_trace.back(), 29.351376662013827, 1e-8);

    const auto ref = naive::irls(testutil::to_naive(X.values()), testutil::to_naive(F.values), 1.0);
    EXPECT_NEAR(st.objective_trace.back(), ref.trace.back(), 1e-8);
}

TEST(SolveIrls, DescentAndQInvariant) {
    std::mt19937_64 rng(10);
    for (auto penalty : {mmfs::Penalty::Squared, mmfs::Penalty::Plain}) {
        for (int t = 0; t < 10; ++t) {
            const auto X = testutil::random_data(rng, 8, 15);
            const mmfs::Template F{testutil::random_matrix(rng, 15, 8)};
            mmfs::SolverConfig cfg;
            cfg.lambda = std::pow(10.0, t % 5 - 2);
            cfg.penalty = penalty;
            const auto st = mmfs::solve_irls(X, F, cfg);
            for (std::size_t i = 1; i < st.objective_trace.size(); ++i)
                EXPECT_LE(st.objective_trace[i], st.objective_trace[i - 1] * (1 + 1e-12));
            if (penalty == mmfs::Penalty::Squared) {
                EXPECT_GE(st.q.minCoeff(), 1.0);
            }
        }
    }
}

TEST(SolveIrls, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    const auto X = testutil::random_data(rng, 4, 6);
    const mmfs::Template F{testutil::random_matrix(rng, 6, 4)};
    const Matrix W = testutil::random_matrix(rng, 4, 4);
    const Vector q = mmfs::update_Q(testutil::random_matrix(rng, 4, 4), 1e-8);
    const double lambda = 0.8;
    auto frozen = [&](const Matrix& w) {
        return (X.values().transpose() * w - F.values).squaredNorm() + lambda * (q.asDiagonal() * w.cwiseAbs2()).sum();
    };
    const Matrix g = mmfs::objective_gradient(X, W, F, lambda, q);
    Matrix fd(4, 4);
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Matrix a = W, b = W;
            a(i, j) += h;
            b(i, j) -= h;
            fd(i, j) = (frozen(a) - frozen(b)) / (2 * h);
        }
    EXPECT_LE((g - fd).norm() / g.norm(), 1e-5);
}

TEST(SolveIrls, LargerLambdaGivesSparserRows) {
    std::mt19937_64 rng(12);
    const auto X = testutil::random_data(rng, 10, 40);
    const mmfs::Template F{X.values().transpose() * testutil::random_matrix(rng, 10, 10) +
                           0.1 * testutil::random_matrix(rng, 40, 10)};
    auto cv = [](const Vector& v) {
        const double m = v.mean();
        return std::sqrt((v.array() - m).square().mean()) / m;
    };
    mmfs::SolverConfig lo, hi;
    lo.lambda = 1e-3;
    hi.lambda = 1e3;
    const Vector n_lo = mmfs::solve_irls(X, F, lo).W.rowwise().norm();
    const Vector n_hi = mmfs::solve_irls(X, F, hi).W.rowwise().norm();
    EXPECT_GT(cv(n_hi), cv(n_lo));
}

TEST(SolverConfig, Validation) {
    mmfs::SolverConfig c;
    c.epsilon = 0;
    EXPECT_THROW(c.validate(), mmfs::PreconditionError);
    c = {};
    c.max_iter = 0;
    EXPECT_THROW(c.validate(), mmfs::PreconditionError);
    c = {};
    c.lambda = -1;
    EXPECT_THROW(c.validate(), mmfs::PreconditionError);
}

} // namespace
