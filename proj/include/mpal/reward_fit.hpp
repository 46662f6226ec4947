#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/dataset.hpp"
#include "mpal/instance.hpp"

namespace mpal {

/// Per-party design: rows are feature differences, y the binary outcomes.
struct PartyDesign {
    Eigen::MatrixXd X;  // n x d
    Eigen::VectorXd y;  // n, entries in {0, 1}
};

inline std::vector<PartyDesign> build_designs(const ComparisonDataset& data,
                                              const CbInstance& inst) {
    data.validate();
    std::vector<PartyDesign> designs(data.num_parties);
    for (int m = 0; m < data.num_parties; ++m) {
        const auto& recs = data.by_party[m];
        require(!recs.empty(), "party dataset is empty");
        designs[m].X.resize(static_cast<Eigen::Index>(recs.size()), inst.feature_dim);
        designs[m].y.resize(static_cast<Eigen::Index>(recs.size()));
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const auto& rec = recs[i];
            require(rec.state >= 0 && rec.state < inst.num_states &&
                        rec.action_1 >= 0 && rec.action_1 < inst.num_actions &&
                        rec.action_0 >= 0 && rec.action_0 < inst.num_actions,
                    "record indices out of range for the instance");
            designs[m].X.row(i) =
                inst.phi(rec.state, rec.action_1) - inst.phi(rec.state, rec.action_0);
            designs[m].y(i) = rec.label;
        }
    }
    return designs;
}

/// Sigma_m = (1/n) sum_i x_i x_i^T over the party's feature differences.
inline std::vector<Eigen::MatrixXd> covariance_matrices(
    const std::vector<PartyDesign>& designs) {
    std::vector<Eigen::MatrixXd> sigmas;
    sigmas.reserve(designs.size());
    for (const auto& ds : designs) {
        require(ds.X.rows() > 0, "party dataset is empty");
        sigmas.push_back(ds.X.transpose() * ds.X / static_cast<double>(ds.X.rows()));
    }
    return sigmas;
}

inline std::vector<Eigen::MatrixXd> covariance_matrices(const ComparisonDataset& data,
                                                        const CbInstance& inst) {
    return covariance_matrices(build_designs(data, inst));
}

/// Gamma(delta, n, M, d, r) = K sqrt(r^2/n + (d r^2 log d + r log(M/delta)) / (M n)).
/// Natural logs; log 1 = 0.
inline double confidence_radius(double delta, long n, int M, int d, int r, double K) {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    require(n > 0 && M > 0 && d > 0 && r > 0, "radius arguments must be positive");
    double rr = static_cast<double>(r);
    double lead = rr * rr / static_cast<double>(n);
    double shared = (static_cast<double>(d) * rr * rr * std::log(static_cast<double>(d)) +
                     rr * std::log(static_cast<double>(M) / delta)) /
                    (static_cast<double>(M) * static_cast<double>(n));
    return K * std::sqrt(lead + shared);
}

struct FitOptions {
    double tol = 1e-9;          // relative loss decrease to stop
    long max_iters = 5000;      // outer iterations
    double grad_tol = 1e-6;     // projected gradient norm for convergence
    double init_ridge = 1e-6;   // ridge of the warm-start logistic fits
    int alpha_iters = 200;      // inner projected-gradient cap per party
    double armijo_c = 1e-4;
    double delta = 0.1;         // failure probability for the radius
    double k_const = 1.0;       // K in the radius
};

struct RewardFit {
    int feature_dim = 0;
    int rank = 0;
    int num_parties = 0;
    long per_party_n = 0;
    double param_bound = 0.0;

    Eigen::MatrixXd U_hat;      // d x r, orthonormal columns
    Eigen::MatrixXd alpha_hat;  // M x r
    Eigen::MatrixXd theta_hat;  // M x d
    std::vector<Eigen::MatrixXd> sigma;  // M data covariances
    double gamma = 0.0;

    std::vector<std::pair<long, double>> loss_trace;
    bool converged = false;
    double final_grad_norm = 0.0;
    std::vector<bool> sigma_positive_definite;
};

namespace detail {

inline double softplus(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return 0.0;
    return std::log1p(std::exp(x));
}

/// Pooled negative log-likelihood of the comparison model.
inline double pooled_nll(const std::vector<PartyDesign>& designs,
                         const std::vector<Eigen::VectorXd>& z) {
    double total = 0.0;
    long count = 0;
    for (std::size_t m = 0; m < designs.size(); ++m) {
        const auto& y = designs[m].y;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            double sign = 2.0 * y(i) - 1.0;
            total += softplus(-sign * z[m](i));
        }
        count += y.size();
    }
    return total / static_cast<double>(count);
}

inline Eigen::VectorXd project_ball(const Eigen::VectorXd& v, double radius) {
    double nv = v.norm();
    if (nv <= radius) return v;
    return v * (radius / nv);
}

/// Unconstrained logistic fit with a small ridge, by damped Newton.
inline Eigen::VectorXd ridge_logistic(const PartyDesign& ds, double ridge) {
    const Eigen::Index n = ds.X.rows();
    const Eigen::Index d = ds.X.cols();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    auto loss = [&](const Eigen::VectorXd& t) {
        Eigen::VectorXd z = ds.X * t;
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            total += softplus(-(2.0 * ds.y(i) - 1.0) * z(i));
        return total / static_cast<double>(n) + 0.5 * ridge * t.squaredNorm();
    };
    double cur = loss(theta);
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd z = ds.X * theta;
        Eigen::VectorXd p = z.unaryExpr([](double v) { return sigmoid(v); });
        Eigen::VectorXd grad =
            ds.X.transpose() * (p - ds.y) / static_cast<double>(n) + ridge * theta;
        if (grad.norm() < 1e-10) break;
        Eigen::VectorXd w = p.array() * (1.0 - p.array());
        Eigen::MatrixXd H = ds.X.transpose() * w.asDiagonal() * ds.X /
                                static_cast<double>(n) +
                            ridge * Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd step = H.ldlt().solve(grad);
        double eta = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            Eigen::VectorXd cand = theta - eta * step;
            double cand_loss = loss(cand);
            if (cand_loss <= cur - 1e-4 * eta * grad.dot(step)) {
                theta = cand;
                cur = cand_loss;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
    }
    return theta;
}

/// Extends a set of orthonormal columns to width r with coordinate vectors.
inline Eigen::MatrixXd complete_orthonormal(const Eigen::MatrixXd& part, int r) {
    const Eigen::Index d = part.rows();
    Eigen::MatrixXd U(d, r);
    int have = static_cast<int>(part.cols());
    U.leftCols(have) = part;
    int next = 0;
    for (int j = have; j < r; ++j) {
        Eigen::VectorXd v;
        while (true) {
            require(next < d, "cannot complete orthonormal basis");
            v = Eigen::VectorXd::Unit(d, next++);
            v -= U.leftCols(j) * (U.leftCols(j).transpose() * v);
            if (v.norm() > 1e-8) break;
        }
        U.col(j) = v / v.norm();
    }
    return U;
}

inline Eigen::MatrixXd qr_orthonormalize(const Eigen::MatrixXd& A) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q =
        qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd R = Q.transpose() * A;
    for (int j = 0; j < Q.cols(); ++j)
        if (R(j, j) < 0) Q.col(j) = -Q.col(j);
    return Q;
}

}  // namespace detail

/// Constrained MLE of the shared-representation comparison model:
/// minimizes the pooled negative log-likelihood over column-orthonormal U
/// and per-party coefficients with norm at most B, by block alternation.
/// Each outer round solves every alpha_m by projected gradient with Armijo
/// backtracking, then takes one line-searched gradient step on U followed by
/// re-orthonormalization (thin QR). Deterministic given the data.
inline RewardFit fit_mle(const std::vector<PartyDesign>& designs, int d, int r,
                         double B, const FitOptions& opts = {}) {
    require(r >= 1 && r <= d, "rank must satisfy 1 <= r <= d");
    require(B > 0.0, "parameter bound must be positive");
    const int M = static_cast<int>(designs.size());
    require(M >= 1, "need at least one party");
    for (const auto& ds : designs) {
        require(ds.X.rows() > 0, "party dataset is empty");
        require(ds.X.cols() == d, "design dimension mismatch");
    }

    // Spectral warm start from independent per-party ridge-logistic fits.
    Eigen::MatrixXd indep(d, M);
    for (int m = 0; m < M; ++m)
        indep.col(m) = detail::ridge_logistic(designs[m], opts.init_ridge);
    Eigen::MatrixXd U;
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(indep, Eigen::ComputeThinU);
        int have = static_cast<int>(std::min<Eigen::Index>(svd.matrixU().cols(), r));
        Eigen::MatrixXd part = svd.matrixU().leftCols(have);
        U = (have == r) ? part : detail::complete_orthonormal(part, r);
        for (int j = 0; j < r; ++j) {
            Eigen::Index imax;
            U.col(j).cwiseAbs().maxCoeff(&imax);
            if (U(imax, j) < 0) U.col(j) = -U.col(j);
        }
    }
    Eigen::MatrixXd alpha(M, r);
    for (int m = 0; m < M; ++m)
        alpha.row(m) = detail::project_ball(U.transpose() * indep.col(m), B);

    std::vector<Eigen::MatrixXd> W(M);  // X_m * U
    std::vector<Eigen::VectorXd> z(M);
    auto refresh = [&](const Eigen::MatrixXd& Ucur) {
        for (int m = 0; m < M; ++m) {
            W[m] = designs[m].X * Ucur;
            z[m] = W[m] * alpha.row(m).transpose();
        }
    };
    refresh(U);

    double cur_loss = detail::pooled_nll(designs, z);
    RewardFit fit;
    fit.loss_trace.push_back({0, cur_loss});

    double u_step = 1.0;
    bool stationary = false;
    long it = 0;
    for (it = 1; it <= opts.max_iters; ++it) {
        // alpha blocks: convex ball-constrained logistic problems
        for (int m = 0; m < M; ++m) {
            const auto& ds = designs[m];
            const double n_m = static_cast<double>(ds.X.rows());
            Eigen::VectorXd a = alpha.row(m).transpose();
            Eigen::VectorXd zm = z[m];
            auto party_loss = [&](const Eigen::VectorXd& zz) {
                double total = 0.0;
                for (Eigen::Index i = 0; i < zz.size(); ++i)
                    total += detail::softplus(-(2.0 * ds.y(i) - 1.0) * zz(i));
                return total / n_m;
            };
            double f = party_loss(zm);
            double step = 1.0;
            for (int inner = 0; inner < opts.alpha_iters; ++inner) {
                Eigen::VectorXd p = zm.unaryExpr([](double v) { return sigmoid(v); });
                Eigen::VectorXd grad = W[m].transpose() * (p - ds.y) / n_m;
                Eigen::VectorXd moved = detail::project_ball(a - grad, B);
                if ((moved - a).norm() < 1e-12) break;
                bool accepted = false;
                for (int bt = 0; bt < 50; ++bt) {
                    Eigen::VectorXd cand = detail::project_ball(a - step * grad, B);
                    Eigen::VectorXd zc = W[m] * cand;
                    double fc = party_loss(zc);
                    if (fc <= f + opts.armijo_c * grad.dot(cand - a)) {
                        a = cand;
                        zm = zc;
                        f = fc;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!accepted) break;
                step = std::min(step * 2.0, 1e6);
            }
            alpha.row(m) = a.transpose();
            z[m] = zm;
        }

        // one retracted gradient step on U, line-searched for descent
        double loss_after_alpha = detail::pooled_nll(designs, z);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, r);
        long total_n = 0;
        for (int m = 0; m < M; ++m) total_n += designs[m].X.rows();
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd p = z[m].unaryExpr([](double v) { return sigmoid(v); });
            Eigen::VectorXd res = p - designs[m].y;
            G.noalias() += (designs[m].X.transpose() * res) * alpha.row(m) /
                           static_cast<double>(total_n);
        }
        double new_loss = loss_after_alpha;
        if (G.norm() > 1e-14) {
            double eta = u_step;
            for (int bt = 0; bt < 40; ++bt) {
                Eigen::MatrixXd Ucand = detail::qr_orthonormalize(U - eta * G);
                std::vector<Eigen::VectorXd> zc(M);
                for (int m = 0; m < M; ++m)
                    zc[m] = (designs[m].X * Ucand) * alpha.row(m).transpose();
                double fc = detail::pooled_nll(designs, zc);
                if (fc <= loss_after_alpha - opts.armijo_c * eta * G.squaredNorm()) {
                    U = Ucand;
                    refresh(U);
                    new_loss = fc;
                    u_step = std::min(eta * 2.0, 1e3);
                    break;
                }
                eta *= 0.5;
                if (eta < 1e-14) break;
            }
        }

        fit.loss_trace.push_back({it, new_loss});
        double rel = (cur_loss - new_loss) / std::max(1.0, std::abs(cur_loss));
        cur_loss = new_loss;
        if (rel >= 0.0 && rel < opts.tol) {
            stationary = true;
            break;
        }
    }

    if (!std::isfinite(cur_loss)) throw SolverError("non-finite loss in MLE fit");

    // Projected gradient norms at the returned point.
    double gnorm = 0.0;
    {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, r);
        long total_n = 0;
        for (int m = 0; m < M; ++m) total_n += designs[m].X.rows();
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd p = z[m].unaryExpr([](double v) { return sigmoid(v); });
            Eigen::VectorXd res = p - designs[m].y;
            Eigen::VectorXd grad_a =
                W[m].transpose() * res / static_cast<double>(designs[m].X.rows());
            Eigen::VectorXd a = alpha.row(m).transpose();
            gnorm = std::max(gnorm, (a - detail::project_ball(a - grad_a, B)).norm());
            G.noalias() += (designs[m].X.transpose() * res) * alpha.row(m) /
                           static_cast<double>(total_n);
        }
        Eigen::MatrixXd UtG = U.transpose() * G;
        Eigen::MatrixXd riem = G - U * 0.5 * (UtG + UtG.transpose());
        gnorm = std::max(gnorm, riem.norm());
    }

    fit.feature_dim = d;
    fit.rank = r;
    fit.num_parties = M;
    fit.per_party_n = designs[0].X.rows();
    fit.param_bound = B;
    fit.U_hat = U;
    fit.alpha_hat = alpha;
    fit.theta_hat = alpha * U.transpose();
    fit.sigma = covariance_matrices(designs);
    fit.gamma = confidence_radius(opts.delta, fit.per_party_n, M, d, r, opts.k_const);
    fit.final_grad_norm = gnorm;
    fit.converged = stationary && gnorm <= opts.grad_tol;
    for (const auto& S : fit.sigma) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        fit.sigma_positive_definite.push_back(es.eigenvalues().minCoeff() > 1e-12);
    }
    return fit;
}

inline RewardFit fit_mle(const ComparisonDataset& data, const CbInstance& inst,
                         int r, double B, const FitOptions& opts = {}) {
    return fit_mle(build_designs(data, inst), inst.feature_dim, r, B, opts);
}

/// Membership in Theta_B(theta_hat_m): inside the norm ball and within
/// gamma of the estimate in the Sigma_m seminorm.
inline bool in_confidence_set(const Eigen::VectorXd& theta, const RewardFit& fit, int m) {
    require(theta.size() == fit.feature_dim, "parameter dimension mismatch");
    require(m >= 0 && m < fit.num_parties, "party index out of range");
    if (theta.norm() > fit.param_bound) return false;
    Eigen::VectorXd diff = theta - fit.theta_hat.row(m).transpose();
    double dist = std::sqrt(std::max(0.0, diff.dot(fit.sigma[m] * diff)));
    return dist <= fit.gamma;
}

}  // namespace mpal
