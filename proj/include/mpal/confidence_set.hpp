#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "mpal/common.hpp"

namespace mpal {

/// Intersection of the parameter norm ball with an ellipsoid around the
/// estimate in the data-covariance seminorm:
///   { theta : ||theta|| <= ball_radius, ||theta - center||_Sigma <= radius }.
/// The seminorm matrix is eigendecomposed once; a degenerate matrix is
/// ridge-regularized so projections are well defined.
struct ConfidenceSet {
    Eigen::VectorXd center;
    Eigen::MatrixXd sigma;
    double ball_radius = 0.0;
    double radius = 0.0;

    Eigen::MatrixXd eigvec;  // sigma = eigvec * diag(eigval) * eigvec^T
    Eigen::VectorXd eigval;
    bool ridged = false;
    bool ellipsoid_within_ball = false;

    ConfidenceSet() = default;

    ConfidenceSet(Eigen::VectorXd c, Eigen::MatrixXd S, double B, double gamma,
                  double ridge = 1e-8)
        : center(std::move(c)), sigma(std::move(S)), ball_radius(B), radius(gamma) {
        sigma = 0.5 * (sigma + sigma.transpose().eval());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
        if (es.eigenvalues().minCoeff() <= 1e-12) {
            sigma += ridge * Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
            es.compute(sigma);
            ridged = true;
        }
        eigvec = es.eigenvectors();
        eigval = es.eigenvalues();
        double reach = (eigval.minCoeff() > 0.0)
                           ? center.norm() + radius / std::sqrt(eigval.minCoeff())
                           : std::numeric_limits<double>::infinity();
        ellipsoid_within_ball = reach <= ball_radius;
    }

    int dim() const { return static_cast<int>(center.size()); }

    double ellipsoid_dist(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd diff = theta - center;
        return std::sqrt(std::max(0.0, diff.dot(sigma * diff)));
    }

    bool contains(const Eigen::VectorXd& theta, double slack = 1e-9) const {
        return theta.norm() <= ball_radius + slack &&
               ellipsoid_dist(theta) <= radius + slack;
    }

    /// ||v||_{Sigma^{-1}} in the eigenbasis.
    double inv_norm(const Eigen::VectorXd& v) const {
        Eigen::VectorXd w = eigvec.transpose() * v;
        double total = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j)
            total += w(j) * w(j) / eigval(j);
        return std::sqrt(total);
    }

    Eigen::VectorXd project_ball(const Eigen::VectorXd& v) const {
        double nv = v.norm();
        if (nv <= ball_radius) return v;
        return v * (ball_radius / nv);
    }

    /// Euclidean projection onto the ellipsoid, via Newton on the Lagrange
    /// multiplier of u = (I + t Sigma)^{-1} u0 in the eigenbasis.
    Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& v) const {
        Eigen::VectorXd u = eigvec.transpose() * (v - center);
        double dist2 = 0.0;
        for (Eigen::Index j = 0; j < u.size(); ++j)
            dist2 += eigval(j) * u(j) * u(j);
        double r2 = radius * radius;
        if (dist2 <= r2) return v;
        if (radius <= 0.0) return center;

        auto g = [&](double t) {
            double total = 0.0;
            for (Eigen::Index j = 0; j < u.size(); ++j) {
                double den = 1.0 + t * eigval(j);
                total += eigval(j) * u(j) * u(j) / (den * den);
            }
            return total - r2;
        };
        double lo = 0.0;
        double hi = 1.0;
        while (g(hi) > 0.0) hi *= 2.0;
        double t = 0.5 * hi;
        for (int it = 0; it < 200; ++it) {
            double val = g(t);
            if (val > 0.0) lo = t; else hi = t;
            double deriv = 0.0;
            for (Eigen::Index j = 0; j < u.size(); ++j) {
                double den = 1.0 + t * eigval(j);
                deriv += -2.0 * eigval(j) * eigval(j) * u(j) * u(j) / (den * den * den);
            }
            double tn = (deriv < 0.0) ? t - val / deriv : 0.5 * (lo + hi);
            if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
            if (std::abs(tn - t) <= 1e-12 * std::max(1.0, t)) { t = tn; break; }
            t = tn;
        }
        Eigen::VectorXd w(u.size());
        for (Eigen::Index j = 0; j < u.size(); ++j)
            w(j) = u(j) / (1.0 + t * eigval(j));
        return center + eigvec * w;
    }

    /// Projection onto ball-and-ellipsoid by Dykstra's alternating scheme.
    Eigen::VectorXd project(const Eigen::VectorXd& v) const {
        if (ellipsoid_within_ball) return project_ellipsoid(v);
        Eigen::VectorXd x = v;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(v.size());
        Eigen::VectorXd q = Eigen::VectorXd::Zero(v.size());
        for (int it = 0; it < 400; ++it) {
            Eigen::VectorXd y = project_ellipsoid(x + p);
            p = x + p - y;
            Eigen::VectorXd x2 = project_ball(y + q);
            q = y + q - x2;
            double change = (x2 - x).norm();
            x = x2;
            if (change < 1e-13 && contains(x, 1e-10)) break;
        }
        return x;
    }
};

/// Result of minimizing a linear functional over a confidence set.
struct LinearMinResult {
    double value = 0.0;
    Eigen::VectorXd argmin;
    double lower_reference = 0.0;  // exact min over each relaxed set
    bool exact = false;
};

/// min v^T theta over the set. The ellipsoid-only and ball-only minimizers
/// are closed-form; when one of them is feasible it is the exact answer.
/// Otherwise both constraints are active and the KKT system is polished by
/// Newton in the two multipliers, with projected descent as a fallback.
inline LinearMinResult min_linear(const ConfidenceSet& set, const Eigen::VectorXd& v) {
    LinearMinResult out;
    const double vnorm = v.norm();
    if (vnorm < 1e-300) {
        out.argmin = set.project(set.center);
        out.value = 0.0;
        out.lower_reference = 0.0;
        out.exact = true;
        return out;
    }

    double inv = set.inv_norm(v);
    double ell_only = v.dot(set.center) - set.radius * inv;
    double ball_only = -set.ball_radius * vnorm;
    out.lower_reference = std::max(ell_only, ball_only);

    // ellipsoid-only minimizer: center - radius * Sigma^{-1} v / ||v||_{Sigma^{-1}}
    Eigen::VectorXd w = set.eigvec.transpose() * v;
    Eigen::VectorXd siv(w.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) siv(j) = w(j) / set.eigval(j);
    Eigen::VectorXd theta_e =
        set.center - (set.radius / std::max(inv, 1e-300)) * (set.eigvec * siv);
    if (theta_e.norm() <= set.ball_radius + 1e-12) {
        out.argmin = theta_e;
        out.value = v.dot(theta_e);
        out.exact = true;
        return out;
    }

    Eigen::VectorXd theta_b = -(set.ball_radius / vnorm) * v;
    if (set.ellipsoid_dist(theta_b) <= set.radius + 1e-12) {
        out.argmin = theta_b;
        out.value = v.dot(theta_b);
        out.exact = true;
        return out;
    }

    // Both constraints active. theta(mu) = -(2 mu1 I + 2 mu2 Sigma)^{-1} (v - 2 mu2 Sigma c).
    auto theta_of = [&](double mu1, double mu2) {
        Eigen::MatrixXd A = 2.0 * mu1 * Eigen::MatrixXd::Identity(set.dim(), set.dim()) +
                            2.0 * mu2 * set.sigma;
        return Eigen::VectorXd(A.ldlt().solve(2.0 * mu2 * set.sigma * set.center - v));
    };

    double mu1 = 0.5 * vnorm / std::max(set.ball_radius, 1e-12);
    double mu2 = 0.5 * inv / std::max(set.radius, 1e-12);
    Eigen::VectorXd theta = set.project(theta_e);
    bool solved = false;
    for (int it = 0; it < 100; ++it) {
        theta = theta_of(mu1, mu2);
        double f1 = theta.squaredNorm() - set.ball_radius * set.ball_radius;
        double f2 = std::pow(set.ellipsoid_dist(theta), 2) - set.radius * set.radius;
        if (std::abs(f1) < 1e-12 && std::abs(f2) < 1e-12) { solved = true; break; }
        Eigen::MatrixXd A = 2.0 * mu1 * Eigen::MatrixXd::Identity(set.dim(), set.dim()) +
                            2.0 * mu2 * set.sigma;
        auto solver = A.ldlt();
        Eigen::VectorXd d1 = solver.solve(-2.0 * theta);
        Eigen::VectorXd d2 = solver.solve(-2.0 * set.sigma * (theta - set.center));
        Eigen::Matrix2d J;
        Eigen::VectorXd sdiff = set.sigma * (theta - set.center);
        J(0, 0) = 2.0 * theta.dot(d1);
        J(0, 1) = 2.0 * theta.dot(d2);
        J(1, 0) = 2.0 * sdiff.dot(d1);
        J(1, 1) = 2.0 * sdiff.dot(d2);
        Eigen::Vector2d F(f1, f2);
        Eigen::Vector2d step = J.fullPivLu().solve(-F);
        double damp = 1.0;
        while ((mu1 + damp * step(0) <= 0.0 || mu2 + damp * step(1) <= 0.0) && damp > 1e-8)
            damp *= 0.5;
        mu1 = std::max(mu1 + damp * step(0), 1e-12);
        mu2 = std::max(mu2 + damp * step(1), 1e-12);
        if (damp * step.norm() < 1e-14 * std::max(1.0, mu1 + mu2)) break;
    }

    Eigen::VectorXd best = set.project(theta);
    double best_val = v.dot(best);
    if (!solved) {
        // projected descent fallback on the linear objective
        Eigen::VectorXd x = best;
        double diam = 2.0 * std::min(set.ball_radius,
                                     set.radius / std::sqrt(set.eigval.minCoeff()));
        for (int t = 1; t <= 400; ++t) {
            double eta = diam / (vnorm * std::sqrt(static_cast<double>(t)));
            x = set.project(x - eta * v);
            double val = v.dot(x);
            if (val < best_val) { best_val = val; best = x; }
        }
    }
    out.argmin = best;
    out.value = best_val;
    out.exact = solved;
    return out;
}

}  // namespace mpal
