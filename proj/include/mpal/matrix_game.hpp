#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "mpal/common.hpp"

namespace mpal {

struct GameSolveOptions {
    double tol = 1e-9;
    long simplex_cap = 200000;
    long mw_cap = 4000000;
    bool force_mw = false;  // tests exercise the fallback path
};

struct GameSolution {
    Eigen::VectorXd p;  // row player's max-min mixed strategy
    Eigen::VectorXd q;  // column player's min-max mixed strategy
    double value = 0.0;
    double certificate_gap = 0.0;
    std::string method;
    long iterations = 0;
};

namespace detail {

/// Duality-gap certificate: how far (p, q) is from an exact saddle point.
inline double game_certificate(const Eigen::MatrixXd& G, const Eigen::VectorXd& p,
                               const Eigen::VectorXd& q, double value) {
    Eigen::VectorXd row_payoff = G.transpose() * p;  // payoff per pure column
    Eigen::VectorXd col_payoff = G * q;              // payoff per pure row
    double worst_for_p = row_payoff.minCoeff();
    double best_for_q = col_payoff.maxCoeff();
    return std::max(value - worst_for_p, best_for_q - value);
}

/// Primal simplex with Bland's rule on: max 1'y  s.t.  G'y <= 1, y >= 0,
/// where G' is the game matrix shifted to strictly positive entries. The
/// optimal y rescales to the column strategy; the slack duals rescale to the
/// row strategy.
inline bool simplex_game(const Eigen::MatrixXd& mat, const GameSolveOptions& opts,
                         GameSolution& out) {
    const int nr = static_cast<int>(mat.rows());
    const int nc = static_cast<int>(mat.cols());
    double shift = 1.0 - mat.minCoeff();
    Eigen::MatrixXd G = mat.array() + shift;

    const int cols = nc + nr;
    Eigen::MatrixXd T(nr, cols + 1);
    T.leftCols(nc) = G;
    T.block(0, nc, nr, nr) = Eigen::MatrixXd::Identity(nr, nr);
    T.col(cols) = Eigen::VectorXd::Ones(nr);
    Eigen::VectorXd reduced(cols);
    reduced.head(nc) = Eigen::VectorXd::Ones(nc);
    reduced.tail(nr) = Eigen::VectorXd::Zero(nr);
    std::vector<int> basis(nr);
    for (int i = 0; i < nr; ++i) basis[i] = nc + i;

    long iters = 0;
    while (true) {
        if (++iters > opts.simplex_cap) return false;
        int enter = -1;
        for (int j = 0; j < cols; ++j)
            if (reduced(j) > 1e-11) { enter = j; break; }  // Bland: smallest index
        if (enter < 0) break;

        int leave = -1;
        double best_ratio = 0.0;
        for (int i = 0; i < nr; ++i) {
            if (T(i, enter) > 1e-11) {
                double ratio = T(i, cols) / T(i, enter);
                if (leave < 0 || ratio < best_ratio - 1e-14 ||
                    (std::abs(ratio - best_ratio) <= 1e-14 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) return false;  // unbounded; cannot happen for G > 0

        double piv = T(leave, enter);
        T.row(leave) /= piv;
        for (int i = 0; i < nr; ++i) {
            if (i == leave) continue;
            double f = T(i, enter);
            if (f != 0.0) T.row(i) -= f * T.row(leave);
        }
        double rf = reduced(enter);
        if (rf != 0.0) reduced -= rf * T.row(leave).head(cols).transpose();
        basis[leave] = enter;
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(nc);
    for (int i = 0; i < nr; ++i)
        if (basis[i] < nc) y(basis[i]) = T(i, cols);
    Eigen::VectorXd u(nr);
    for (int i = 0; i < nr; ++i) u(i) = -reduced(nc + i);

    double sum_y = y.sum();
    double sum_u = u.sum();
    if (sum_y <= 0.0 || sum_u <= 0.0) return false;

    out.q = (y / sum_y).cwiseMax(0.0);
    out.q /= out.q.sum();
    out.p = (u / sum_u).cwiseMax(0.0);
    out.p /= out.p.sum();
    out.value = 1.0 / sum_y - shift;
    out.method = "simplex";
    out.iterations = iters;
    return true;
}

/// Hedge self-play; the averaged strategies form an approximate saddle
/// point with gap O(range * sqrt(log(rows+cols) / T)).
inline bool mw_game(const Eigen::MatrixXd& mat, const GameSolveOptions& opts,
                    GameSolution& out) {
    const int nr = static_cast<int>(mat.rows());
    const int nc = static_cast<int>(mat.cols());
    double range = std::max(1e-12, mat.maxCoeff() - mat.minCoeff());
    double logn = std::log(std::max(2, std::max(nr, nc)));
    long T = static_cast<long>(std::ceil(16.0 * logn / (opts.tol * opts.tol)));
    if (T > opts.mw_cap) T = opts.mw_cap;
    double eta = std::sqrt(8.0 * logn / static_cast<double>(T)) / range;

    Eigen::VectorXd score_p = Eigen::VectorXd::Zero(nr);
    Eigen::VectorXd score_q = Eigen::VectorXd::Zero(nc);
    Eigen::VectorXd avg_p = Eigen::VectorXd::Zero(nr);
    Eigen::VectorXd avg_q = Eigen::VectorXd::Zero(nc);
    for (long t = 0; t < T; ++t) {
        Eigen::VectorXd p = (eta * (score_p.array() - score_p.maxCoeff())).exp();
        p /= p.sum();
        Eigen::VectorXd q = (-eta * (score_q.array() - score_q.minCoeff())).exp();
        q /= q.sum();
        avg_p += p;
        avg_q += q;
        score_p += mat * q;
        score_q += mat.transpose() * p;
    }
    avg_p /= avg_p.sum();
    avg_q /= avg_q.sum();
    out.p = avg_p;
    out.q = avg_q;
    out.value = out.p.dot(mat * out.q);
    out.method = "multiplicative_weights";
    out.iterations = T;
    return true;
}

}  // namespace detail

/// Max-min strategies of the zero-sum matrix game max_p min_q p' M q; the
/// matrix may be rectangular. Solved by a dense simplex with Bland's rule;
/// a multiplicative-weights loop is the fallback when the pivot budget runs
/// out. The returned strategies carry a duality-gap certificate checked
/// against tol.
inline GameSolution solve_matrix_game(const Eigen::MatrixXd& mat,
                                      const GameSolveOptions& opts = {}) {
    require(mat.rows() >= 1 && mat.cols() >= 1, "game matrix must be nonempty");
    require(mat.allFinite(), "game matrix must be finite");

    GameSolution out;
    bool ok = false;
    if (!opts.force_mw) ok = detail::simplex_game(mat, opts, out);
    if (!ok) {
        GameSolution mw;
        if (!detail::mw_game(mat, opts, mw))
            throw SolverError("matrix game: both solvers exhausted their budgets");
        mw.certificate_gap = detail::game_certificate(mat, mw.p, mw.q, mw.value);
        if (mw.certificate_gap > opts.tol)
            throw SolverError(
                "matrix game: fallback certificate gap " +
                std::to_string(mw.certificate_gap) + " exceeds tolerance after " +
                std::to_string(mw.iterations) + " rounds");
        return mw;
    }
    out.certificate_gap = detail::game_certificate(mat, out.p, out.q, out.value);
    if (out.certificate_gap > opts.tol) {
        GameSolution mw;
        if (detail::mw_game(mat, opts, mw)) {
            mw.certificate_gap = detail::game_certificate(mat, mw.p, mw.q, mw.value);
            if (mw.certificate_gap < out.certificate_gap) out = mw;
        }
        if (out.certificate_gap > opts.tol)
            throw SolverError("matrix game: certificate gap " +
                              std::to_string(out.certificate_gap) +
                              " exceeds tolerance");
    }
    return out;
}

}  // namespace mpal
