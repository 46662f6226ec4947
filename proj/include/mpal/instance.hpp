#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/rng.hpp"

namespace mpal {

/// One unordered action pair with its generation probability at a state.
struct PairChoice {
    int action_1 = 0;
    int action_0 = 0;
    double prob = 0.0;
};

/// Ground-truth contextual-bandit environment with linear rewards that share
/// a low-rank representation: theta_m = U alpha_m, U column-orthonormal.
struct CbInstance {
    int num_states = 0;
    int num_actions = 0;
    int feature_dim = 0;
    int rank = 0;
    int num_parties = 0;

    Eigen::MatrixXd features;       // (S*A) x d, row s*A+a holds phi(s,a)
    Eigen::MatrixXd shared_factor;  // d x r
    Eigen::MatrixXd party_coeffs;   // M x r, row m holds alpha_m
    Eigen::MatrixXd party_params;   // M x d, row m holds theta_m

    double param_bound = 0.0;    // B
    double feature_bound = 0.0;  // L

    Eigen::VectorXd initial_dist;             // S
    std::vector<std::vector<PairChoice>> pair_gen;  // per state

    std::vector<std::string> notes;  // construction warnings, not serialized

    Eigen::VectorXd phi(int s, int a) const {
        return features.row(static_cast<Eigen::Index>(s) * num_actions + a);
    }

    double reward(int m, int s, int a) const {
        return party_params.row(m).dot(
            features.row(static_cast<Eigen::Index>(s) * num_actions + a));
    }

    /// Per-state minimal reward of party m (the zero utility for Nash/Leximin).
    double zero_reward(int m, int s) const {
        double best = reward(m, s, 0);
        for (int a = 1; a < num_actions; ++a) best = std::min(best, reward(m, s, a));
        return best;
    }

    void validate() const {
        require(num_states > 0 && num_actions > 0 && feature_dim > 0 && num_parties > 0,
                "instance dimensions must be positive");
        require(rank > 0 && rank <= feature_dim, "rank must satisfy 0 < r <= d");
        require(features.rows() == static_cast<Eigen::Index>(num_states) * num_actions &&
                    features.cols() == feature_dim,
                "feature table shape mismatch");
        require(shared_factor.rows() == feature_dim && shared_factor.cols() == rank,
                "shared factor shape mismatch");
        require(party_coeffs.rows() == num_parties && party_coeffs.cols() == rank,
                "party coefficient shape mismatch");
        require(party_params.rows() == num_parties && party_params.cols() == feature_dim,
                "party parameter shape mismatch");

        Eigen::MatrixXd gram = shared_factor.transpose() * shared_factor;
        require((gram - Eigen::MatrixXd::Identity(rank, rank)).cwiseAbs().maxCoeff() < 1e-10,
                "shared factor columns are not orthonormal");
        Eigen::MatrixXd recon = party_coeffs * shared_factor.transpose();
        require((recon - party_params).cwiseAbs().maxCoeff() < 1e-12,
                "party parameters do not match shared_factor * coeffs");

        for (int m = 0; m < num_parties; ++m)
            require(party_params.row(m).norm() <= param_bound + 1e-9,
                    "party parameter norm exceeds B");
        for (Eigen::Index i = 0; i < features.rows(); ++i)
            require(features.row(i).norm() <= feature_bound + 1e-9,
                    "feature norm exceeds L");

        require(initial_dist.size() == num_states, "initial distribution size mismatch");
        require(initial_dist.minCoeff() >= 0.0, "initial distribution has negative mass");
        require(std::abs(initial_dist.sum() - 1.0) <= 1e-12,
                "initial distribution does not sum to 1");
        require(static_cast<int>(pair_gen.size()) == num_states,
                "pair generator must cover every state");
        for (const auto& row : pair_gen) {
            double total = 0.0;
            for (const auto& pc : row) {
                require(pc.action_1 >= 0 && pc.action_1 < num_actions &&
                            pc.action_0 >= 0 && pc.action_0 < num_actions,
                        "pair generator references an unknown action");
                require(pc.prob >= 0.0, "pair probability is negative");
                total += pc.prob;
            }
            require(std::abs(total - 1.0) <= 1e-12, "pair probabilities do not sum to 1");
        }
    }
};

/// Finite-horizon tabular MDP with known transitions. Preferences compare
/// whole trajectories; the trajectory pair generator rolls out two
/// independent uniform-action trajectories from a shared initial state.
struct MdpInstance {
    int num_states = 0;
    int num_actions = 0;
    int feature_dim = 0;
    int rank = 0;
    int num_parties = 0;
    int horizon = 1;

    Eigen::MatrixXd features;
    Eigen::MatrixXd shared_factor;
    Eigen::MatrixXd party_coeffs;
    Eigen::MatrixXd party_params;

    double param_bound = 0.0;
    double feature_bound = 0.0;

    Eigen::VectorXd initial_dist;
    // transitions[h] has shape (S*A) x S, row s*A+a = P_h(.|s,a), h in [0, H-2]
    std::vector<Eigen::MatrixXd> transitions;

    Eigen::VectorXd phi(int s, int a) const {
        return features.row(static_cast<Eigen::Index>(s) * num_actions + a);
    }

    double reward(int m, int s, int a) const {
        return party_params.row(m).dot(
            features.row(static_cast<Eigen::Index>(s) * num_actions + a));
    }

    double zero_reward(int m, int s) const {
        double best = reward(m, s, 0);
        for (int a = 1; a < num_actions; ++a) best = std::min(best, reward(m, s, a));
        return best;
    }

    void validate() const {
        require(horizon >= 1, "horizon must be at least 1");
        require(static_cast<int>(transitions.size()) == horizon - 1,
                "need one transition kernel per step before the last");
        for (const auto& T : transitions) {
            require(T.rows() == static_cast<Eigen::Index>(num_states) * num_actions &&
                        T.cols() == num_states,
                    "transition kernel shape mismatch");
            for (Eigen::Index i = 0; i < T.rows(); ++i) {
                require(T.row(i).minCoeff() >= 0.0, "negative transition probability");
                require(std::abs(T.row(i).sum() - 1.0) <= 1e-12,
                        "transition row does not sum to 1");
            }
        }
        CbInstance flat = as_bandit();
        flat.validate();
    }

    /// The embedded one-step view: same rewards and initial distribution,
    /// action pairs drawn as two independent uniform actions.
    CbInstance as_bandit() const {
        CbInstance cb;
        cb.num_states = num_states;
        cb.num_actions = num_actions;
        cb.feature_dim = feature_dim;
        cb.rank = rank;
        cb.num_parties = num_parties;
        cb.features = features;
        cb.shared_factor = shared_factor;
        cb.party_coeffs = party_coeffs;
        cb.party_params = party_params;
        cb.param_bound = param_bound;
        cb.feature_bound = feature_bound;
        cb.initial_dist = initial_dist;
        cb.pair_gen.assign(num_states, {});
        double p = 1.0 / (static_cast<double>(num_actions) * num_actions);
        for (int s = 0; s < num_states; ++s)
            for (int a1 = 0; a1 < num_actions; ++a1)
                for (int a0 = 0; a0 < num_actions; ++a0)
                    cb.pair_gen[s].push_back({a1, a0, p});
        // absorb rounding so the row sums to exactly 1
        for (int s = 0; s < num_states; ++s) {
            double total = 0.0;
            for (const auto& pc : cb.pair_gen[s]) total += pc.prob;
            cb.pair_gen[s].back().prob += 1.0 - total;
        }
        return cb;
    }
};

/// Diversity / feature-design summary: nu and kappa from the party gram
/// matrix, extreme eigenvalues of the population feature-difference
/// covariance.
struct DiversityStats {
    double nu = 0.0;
    double kappa = 0.0;
    double eig_min = 0.0;
    double eig_max = 0.0;
    Eigen::MatrixXd sigma_star;
    bool nu_degenerate = false;
    bool cmin_nonpositive = false;
    std::vector<std::string> warnings;
};

inline DiversityStats diversity_stats(const CbInstance& inst, int /*mc_samples*/ = 0) {
    DiversityStats out;
    const int d = inst.feature_dim;
    out.sigma_star = Eigen::MatrixXd::Zero(d, d);
    for (int s = 0; s < inst.num_states; ++s) {
        double rho = inst.initial_dist(s);
        if (rho == 0.0) continue;
        for (const auto& pc : inst.pair_gen[s]) {
            if (pc.prob == 0.0) continue;
            Eigen::VectorXd diff = inst.phi(s, pc.action_1) - inst.phi(s, pc.action_0);
            out.sigma_star.noalias() += (rho * pc.prob) * (diff * diff.transpose());
        }
    }
    out.sigma_star = 0.5 * (out.sigma_star + out.sigma_star.transpose().eval());

    Eigen::MatrixXd gram =
        inst.party_params * inst.party_params.transpose() / inst.num_parties;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
    Eigen::VectorXd sv = svd.singularValues();
    out.nu = (inst.rank <= inst.num_parties) ? sv(inst.rank - 1) : 0.0;
    if (out.nu > 1e-12) {
        out.kappa = sv(0) / out.nu;
    } else {
        out.nu_degenerate = true;
        out.kappa = std::numeric_limits<double>::infinity();
        out.warnings.push_back("diversity is degenerate: nu = 0 (rank-deficient parties)");
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.sigma_star);
    out.eig_min = es.eigenvalues().minCoeff();
    out.eig_max = es.eigenvalues().maxCoeff();
    if (out.eig_min <= 1e-12) {
        out.cmin_nonpositive = true;
        out.warnings.push_back("feature design assumption violated: C_min <= 0");
    }
    return out;
}

namespace detail {

/// Thin orthonormal factor of stacked parameters (columns = theta_m).
/// Any orthonormal basis of the column span works; signs are fixed for
/// determinism.
inline void refactor_params(const Eigen::MatrixXd& thetas_cols, int r,
                            Eigen::MatrixXd& U, Eigen::MatrixXd& alphas_rows) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(thetas_cols, Eigen::ComputeThinU);
    U = svd.matrixU().leftCols(r);
    for (int j = 0; j < U.cols(); ++j) {
        Eigen::Index imax;
        U.col(j).cwiseAbs().maxCoeff(&imax);
        if (U(imax, j) < 0) U.col(j) = -U.col(j);
    }
    alphas_rows = (U.transpose() * thetas_cols).transpose();  // M x r
}

inline std::vector<PairChoice> uniform_unordered_pairs(int num_actions) {
    std::vector<PairChoice> out;
    for (int a = 0; a < num_actions; ++a)
        for (int b = a + 1; b < num_actions; ++b) out.push_back({a, b, 0.0});
    double p = 1.0 / static_cast<double>(out.size());
    for (auto& pc : out) pc.prob = p;
    double total = 0.0;
    for (const auto& pc : out) total += pc.prob;
    out.back().prob += 1.0 - total;
    return out;
}

}  // namespace detail

/// Two parties over three options with opposed top choices and a shared
/// near-optimal compromise: R1 = (1, 0, 1-eps), R2 = (0, 1, 1-eps) over
/// actions (A, B, C), realized with one-hot features.
inline CbInstance build_intro_example(double epsilon) {
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    CbInstance inst;
    inst.num_states = 1;
    inst.num_actions = 3;
    inst.feature_dim = 3;
    inst.rank = 2;
    inst.num_parties = 2;
    inst.features = Eigen::MatrixXd::Identity(3, 3);

    inst.party_params.resize(2, 3);
    inst.party_params.row(0) << 1.0, 0.0, 1.0 - epsilon;
    inst.party_params.row(1) << 0.0, 1.0, 1.0 - epsilon;
    detail::refactor_params(inst.party_params.transpose(), inst.rank,
                            inst.shared_factor, inst.party_coeffs);

    inst.param_bound = std::sqrt(1.0 + (1.0 - epsilon) * (1.0 - epsilon));
    inst.feature_bound = 1.0;
    inst.initial_dist = Eigen::VectorXd::Ones(1);
    inst.pair_gen = {detail::uniform_unordered_pairs(3)};
    return inst;
}

/// One observation-budget cell of a designed-pairs dataset.
struct DesignedCell {
    int state = 0;
    int action_1 = 0;
    int action_0 = 0;
    long count = 0;
};

/// Per-pair observation budget of the hard single-party instance:
/// n(s, a1, a2) = (n/S)(1 - 2/C^2) and n(s, a2, a3) = (n/S)(2/C^2),
/// rounded down with the remainder assigned to the first pair.
inline std::vector<DesignedCell> lower_bound_counts(int rank, double C, long n) {
    require(rank > 6 && rank % 3 == 0, "rank must be > 6 and divisible by 3");
    require(C >= 2.0, "C must be at least 2");
    int S = rank / 3;
    double per_state = static_cast<double>(n) / S;
    std::vector<DesignedCell> cells;
    for (int s = 0; s < S; ++s) {
        long total = static_cast<long>(std::floor(per_state + 1e-9));
        long second = static_cast<long>(std::floor(per_state * (2.0 / (C * C)) + 1e-9));
        long first = total - second;
        cells.push_back({s, 0, 1, first});
        cells.push_back({s, 1, 2, second});
    }
    return cells;
}

/// Single-party lower-bound instance indexed by a sign vector tau: S = r/3
/// states, four actions with fixed features, per-state parameter blocks
/// v_{-1} or v_{+1} with gap Delta = C * sqrt(S/n).
inline CbInstance build_lower_bound_instance(int rank, double C, long n,
                                             const std::vector<int>& tau) {
    require(rank > 6 && rank % 3 == 0, "rank must be > 6 and divisible by 3");
    require(C >= 2.0, "C must be at least 2");
    int S = rank / 3;
    require(static_cast<int>(tau.size()) == S, "tau must have length r/3");
    for (int t : tau) require(t == 1 || t == -1, "tau entries must be +1 or -1");

    CbInstance inst;
    inst.num_states = S;
    inst.num_actions = 4;
    inst.feature_dim = rank;
    inst.rank = rank;
    inst.num_parties = 1;

    inst.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S) * 4, rank);
    for (int s = 0; s < S; ++s) {
        int b = 3 * s;
        inst.features(s * 4 + 0, b) = 1.0;
        inst.features(s * 4 + 0, b + 1) = -1.0;
        inst.features(s * 4 + 1, b) = 1.0;
        // action 2 has the zero feature
        inst.features(s * 4 + 3, b + 1) = 1.0;
    }

    double delta = C * std::sqrt(static_cast<double>(S) / static_cast<double>(n));
    double inv_r = 1.0 / rank;
    Eigen::VectorXd theta(rank);
    for (int s = 0; s < S; ++s) {
        int b = 3 * s;
        if (tau[s] < 0) {
            theta(b) = inv_r;
            theta(b + 1) = inv_r + delta;
            theta(b + 2) = -2.0 * inv_r - delta;
        } else {
            theta(b) = inv_r + 2.0 * delta;
            theta(b + 1) = inv_r + delta;
            theta(b + 2) = -2.0 * inv_r - 3.0 * delta;
        }
    }
    inst.party_params = theta.transpose();
    inst.shared_factor = Eigen::MatrixXd::Identity(rank, rank);
    inst.party_coeffs = inst.party_params;
    inst.param_bound = 1.0;
    inst.feature_bound = std::sqrt(2.0);
    if (static_cast<double>(n) < static_cast<double>(rank) * C * C)
        inst.notes.push_back("sample budget below r*C^2; lower-bound regime not met");
    if (theta.norm() > 1.0)
        inst.notes.push_back("parameter norm exceeds 1; increase n or decrease C");

    inst.initial_dist = Eigen::VectorXd::Constant(S, 1.0 / S);
    double massS = inst.initial_dist.sum();
    inst.initial_dist(S - 1) += 1.0 - massS;

    double p2 = 2.0 / (C * C);
    inst.pair_gen.assign(S, {});
    for (int s = 0; s < S; ++s)
        inst.pair_gen[s] = {{0, 1, 1.0 - p2}, {1, 2, p2}};
    return inst;
}

/// Two-state, three-action, two-party instance where every deterministic
/// policy leaves some party at least 1/2 below its own optimum.
inline CbInstance build_prop_d1_instance() {
    CbInstance inst;
    inst.num_states = 2;
    inst.num_actions = 3;
    inst.feature_dim = 2;
    inst.rank = 2;
    inst.num_parties = 2;

    inst.features = Eigen::MatrixXd::Zero(6, 2);
    inst.features(0, 0) = 1.0;  // (s0, a0) -> e1
    inst.features(1, 1) = 1.0;  // (s0, a1) -> e2
    inst.features(3, 1) = 1.0;  // (s1, a0) -> e2
    inst.features(4, 0) = 1.0;  // (s1, a1) -> e1

    inst.shared_factor = Eigen::MatrixXd::Identity(2, 2);
    inst.party_coeffs = Eigen::MatrixXd::Identity(2, 2);
    inst.party_params = inst.party_coeffs;
    inst.param_bound = 1.0;
    inst.feature_bound = 1.0;
    inst.initial_dist = Eigen::VectorXd::Constant(2, 0.5);
    inst.pair_gen = {detail::uniform_unordered_pairs(3),
                     detail::uniform_unordered_pairs(3)};
    return inst;
}

struct RandomInstanceOptions {
    double bound_margin = 1.25;  // B relative to the largest true norm
    bool with_intercept = false;
};

/// Random well-conditioned instance for experiments and property tests.
inline CbInstance make_random_instance(int S, int A, int d, int r, int M,
                                       std::uint64_t seed,
                                       const RandomInstanceOptions& opts = {}) {
    require(S > 0 && A > 1 && d > 0 && r > 0 && r <= d && M > 0,
            "bad random instance dimensions");
    Rng rng(mix64(seed ^ 0x7b1ULL));
    CbInstance inst;
    inst.num_states = S;
    inst.num_actions = A;
    inst.feature_dim = d;
    inst.rank = r;
    inst.num_parties = M;

    inst.features.resize(static_cast<Eigen::Index>(S) * A, d);
    for (Eigen::Index i = 0; i < inst.features.rows(); ++i) {
        Eigen::VectorXd v(d);
        int start = opts.with_intercept ? 1 : 0;
        if (opts.with_intercept) v(0) = 1.0;
        for (int j = start; j < d; ++j) v(j) = rng.gaussian();
        if (d > start) {
            double target = 0.4 + 0.6 * rng.uniform();
            double tail = v.tail(d - start).norm();
            if (tail > 0) v.tail(d - start) *= target / tail;
        }
        inst.features.row(i) = v;
    }
    inst.feature_bound = 0.0;
    for (Eigen::Index i = 0; i < inst.features.rows(); ++i)
        inst.feature_bound = std::max(inst.feature_bound, inst.features.row(i).norm());

    Eigen::MatrixXd G(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) G(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    inst.shared_factor =
        qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
    for (int j = 0; j < r; ++j) {
        Eigen::Index imax;
        inst.shared_factor.col(j).cwiseAbs().maxCoeff(&imax);
        if (inst.shared_factor(imax, j) < 0)
            inst.shared_factor.col(j) = -inst.shared_factor.col(j);
    }

    inst.party_coeffs.resize(M, r);
    double max_norm = 0.0;
    for (int m = 0; m < M; ++m) {
        Eigen::VectorXd a(r);
        for (int j = 0; j < r; ++j) a(j) = rng.gaussian();
        double target = 0.6 + 0.4 * rng.uniform();
        a *= target / a.norm();
        inst.party_coeffs.row(m) = a;
        max_norm = std::max(max_norm, a.norm());
    }
    inst.party_params = inst.party_coeffs * inst.shared_factor.transpose();
    inst.param_bound = opts.bound_margin * max_norm;

    inst.initial_dist.resize(S);
    for (int s = 0; s < S; ++s) inst.initial_dist(s) = 0.2 + rng.uniform();
    inst.initial_dist /= inst.initial_dist.sum();
    inst.initial_dist(S - 1) += 1.0 - inst.initial_dist.sum();

    inst.pair_gen.assign(S, {});
    for (int s = 0; s < S; ++s)
        inst.pair_gen[s] = detail::uniform_unordered_pairs(A);
    return inst;
}

/// Random finite-horizon MDP with dense random transitions.
inline MdpInstance make_random_mdp(int S, int A, int d, int r, int M, int H,
                                   std::uint64_t seed,
                                   const RandomInstanceOptions& opts = {}) {
    require(H >= 1, "horizon must be at least 1");
    CbInstance cb = make_random_instance(S, A, d, r, M, seed, opts);
    Rng rng(mix64(seed ^ 0x3d9ULL));
    MdpInstance mdp;
    mdp.num_states = cb.num_states;
    mdp.num_actions = cb.num_actions;
    mdp.feature_dim = cb.feature_dim;
    mdp.rank = cb.rank;
    mdp.num_parties = cb.num_parties;
    mdp.horizon = H;
    mdp.features = cb.features;
    mdp.shared_factor = cb.shared_factor;
    mdp.party_coeffs = cb.party_coeffs;
    mdp.party_params = cb.party_params;
    mdp.param_bound = cb.param_bound;
    mdp.feature_bound = cb.feature_bound;
    mdp.initial_dist = cb.initial_dist;
    for (int h = 0; h + 1 < H; ++h) {
        Eigen::MatrixXd T(static_cast<Eigen::Index>(S) * A, S);
        for (Eigen::Index i = 0; i < T.rows(); ++i) {
            for (int s2 = 0; s2 < S; ++s2) T(i, s2) = 0.1 + rng.uniform();
            T.row(i) /= T.row(i).sum();
            T(i, S - 1) += 1.0 - T.row(i).sum();
        }
        mdp.transitions.push_back(std::move(T));
    }
    return mdp;
}

}  // namespace mpal
