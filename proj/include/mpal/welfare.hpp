#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/confidence_set.hpp"
#include "mpal/instance.hpp"
#include "mpal/reward_fit.hpp"
#include "mpal/rng.hpp"

namespace mpal {

enum class WelfareKind { nash, utilitarian, leximin };

inline std::string to_string(WelfareKind k) {
    switch (k) {
        case WelfareKind::nash: return "nash";
        case WelfareKind::utilitarian: return "utilitarian";
        case WelfareKind::leximin: return "leximin";
    }
    return "nash";
}

inline WelfareKind parse_welfare(const std::string& s) {
    if (s == "nash") return WelfareKind::nash;
    if (s == "utilitarian" || s == "util") return WelfareKind::utilitarian;
    if (s == "leximin") return WelfareKind::leximin;
    throw ValidationError("unknown welfare kind: " + s);
}

using Policy = std::vector<int>;

/// Nash and Leximin normalize by a per-state zero reward, by default the
/// state's minimal reward; a reference policy may be supplied instead.
struct WelfareSpec {
    WelfareKind kind = WelfareKind::nash;
    std::optional<Policy> zero_reference;
};

/// Tabular evaluation context: a feature table plus nonnegative state
/// weights (the initial distribution for bandits, an occupancy measure for
/// MDPs).
struct ValueContext {
    int num_states = 0;
    int num_actions = 0;
    int feature_dim = 0;
    Eigen::MatrixXd features;  // (S*A) x d
    Eigen::VectorXd weights;   // S

    Eigen::VectorXd phi(int s, int a) const {
        return features.row(static_cast<Eigen::Index>(s) * num_actions + a);
    }

    static ValueContext from_instance(const CbInstance& inst) {
        ValueContext ctx;
        ctx.num_states = inst.num_states;
        ctx.num_actions = inst.num_actions;
        ctx.feature_dim = inst.feature_dim;
        ctx.features = inst.features;
        ctx.weights = inst.initial_dist;
        return ctx;
    }
};

namespace detail {

/// Per-state normalized utility of one party: reward at the policy action
/// minus the zero reward (per-state minimum, or reward under a reference
/// policy).
inline Eigen::VectorXd party_utils(const Eigen::VectorXd& theta, const ValueContext& ctx,
                                   const Policy& policy, const WelfareSpec& spec) {
    Eigen::VectorXd z = ctx.features * theta;
    Eigen::VectorXd u(ctx.num_states);
    for (int s = 0; s < ctx.num_states; ++s) {
        double at_policy = z(static_cast<Eigen::Index>(s) * ctx.num_actions + policy[s]);
        double zero;
        if (spec.zero_reference) {
            zero = z(static_cast<Eigen::Index>(s) * ctx.num_actions +
                     (*spec.zero_reference)[s]);
        } else {
            zero = z(static_cast<Eigen::Index>(s) * ctx.num_actions);
            for (int a = 1; a < ctx.num_actions; ++a)
                zero = std::min(zero,
                                z(static_cast<Eigen::Index>(s) * ctx.num_actions + a));
        }
        u(s) = at_policy - zero;
    }
    return u;
}

inline double combine_state(const WelfareSpec& spec, const Eigen::MatrixXd& utils,
                            const Eigen::VectorXd& raw, int s) {
    switch (spec.kind) {
        case WelfareKind::utilitarian:
            return raw(s);
        case WelfareKind::nash: {
            double prod = 1.0;
            for (Eigen::Index m = 0; m < utils.rows(); ++m) prod *= utils(m, s);
            return prod;
        }
        case WelfareKind::leximin: {
            double low = utils(0, s);
            for (Eigen::Index m = 1; m < utils.rows(); ++m)
                low = std::min(low, utils(m, s));
            return low;
        }
    }
    return 0.0;
}

}  // namespace detail

/// Expected welfare of a deterministic policy under the given parameters.
/// Nash multiplies normalized utilities, Utilitarian sums raw rewards,
/// Leximin takes the worst normalized utility, all weighted by the context's
/// state weights.
inline double eval_welfare(const Eigen::MatrixXd& thetas, const ValueContext& ctx,
                           const Policy& policy, const WelfareSpec& spec) {
    require(static_cast<int>(policy.size()) == ctx.num_states,
            "policy must cover every state");
    const int M = static_cast<int>(thetas.rows());
    Eigen::MatrixXd utils(M, ctx.num_states);
    Eigen::VectorXd raw_sum = Eigen::VectorXd::Zero(ctx.num_states);
    for (int m = 0; m < M; ++m) {
        Eigen::VectorXd theta = thetas.row(m);
        if (spec.kind == WelfareKind::utilitarian) {
            Eigen::VectorXd z = ctx.features * theta;
            for (int s = 0; s < ctx.num_states; ++s)
                raw_sum(s) += z(static_cast<Eigen::Index>(s) * ctx.num_actions + policy[s]);
        } else {
            utils.row(m) = detail::party_utils(theta, ctx, policy, spec);
        }
    }
    double total = 0.0;
    for (int s = 0; s < ctx.num_states; ++s) {
        double w = ctx.weights(s);
        if (w == 0.0) continue;
        total += w * detail::combine_state(spec, utils, raw_sum, s);
    }
    return total;
}

/// True expected welfare under the instance's ground-truth parameters.
inline double true_value(const CbInstance& inst, const Policy& policy,
                         const WelfareSpec& spec) {
    return eval_welfare(inst.party_params, ValueContext::from_instance(inst), policy, spec);
}

inline double true_value(const CbInstance& inst, const Policy& policy, WelfareKind kind) {
    return true_value(inst, policy, WelfareSpec{kind, std::nullopt});
}

/// One confidence set per party.
using PartyModels = std::vector<ConfidenceSet>;

inline PartyModels make_party_models(const RewardFit& fit, double ridge = 1e-8) {
    PartyModels models;
    models.reserve(fit.num_parties);
    for (int m = 0; m < fit.num_parties; ++m)
        models.emplace_back(fit.theta_hat.row(m).transpose(), fit.sigma[m],
                            fit.param_bound, fit.gamma, ridge);
    return models;
}

/// Zero-radius sets at the ground truth; useful for oracle comparisons.
inline PartyModels models_from_truth(const CbInstance& inst) {
    PartyModels models;
    for (int m = 0; m < inst.num_parties; ++m)
        models.emplace_back(inst.party_params.row(m).transpose(),
                            Eigen::MatrixXd::Identity(inst.feature_dim, inst.feature_dim),
                            inst.param_bound, 0.0);
    return models;
}

struct SolveOptions {
    long enum_cap = 1000000;   // exact mode refuses larger policy spaces
    int starts = 8;            // multi-start count for the inner problem
    int subgrad_iters = 150;   // projected subgradient budget per block
    int max_sweeps = 30;       // block-coordinate sweeps per start
    int polish_rounds = 6;     // exact linear re-solves on the active piece
    double inner_tol = 1e-7;
    double ridge = 1e-8;
    int alt_max_iters = 100;
    bool record_enumeration = false;
};

struct PessimisticValue {
    double value = 0.0;
    Eigen::MatrixXd inner_thetas;  // M x d
    int starts_used = 0;
    int sweeps = 0;
    double residual = 0.0;
    bool certified = false;
};

namespace detail {

struct BlockProblem {
    const ConfidenceSet* set;
    const ValueContext* ctx;
    const Policy* policy;
    const WelfareSpec* spec;
    Eigen::VectorXd weights;  // per-state multiplier (Nash) or rho (Leximin)
    Eigen::VectorXd caps;     // Leximin: min over other parties, +inf otherwise
    bool leximin = false;

    double objective(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd u = party_utils(theta, *ctx, *policy, *spec);
        double total = 0.0;
        for (int s = 0; s < ctx->num_states; ++s)
            total += leximin ? weights(s) * std::min(u(s), caps(s))
                             : weights(s) * u(s);
        return total;
    }

    /// Subgradient: policy feature minus the feature of the per-state
    /// minimizing action, over states whose piece is active.
    Eigen::VectorXd subgradient(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd z = ctx->features * theta;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(ctx->feature_dim);
        for (int s = 0; s < ctx->num_states; ++s) {
            if (weights(s) == 0.0) continue;
            int amin = 0;
            if (spec->zero_reference) {
                amin = (*spec->zero_reference)[s];
            } else {
                double best = z(static_cast<Eigen::Index>(s) * ctx->num_actions);
                for (int a = 1; a < ctx->num_actions; ++a) {
                    double v = z(static_cast<Eigen::Index>(s) * ctx->num_actions + a);
                    if (v < best) { best = v; amin = a; }
                }
            }
            double u = z(static_cast<Eigen::Index>(s) * ctx->num_actions + (*policy)[s]) -
                       z(static_cast<Eigen::Index>(s) * ctx->num_actions + amin);
            if (leximin && u > caps(s)) continue;
            g += weights(s) * (ctx->phi(s, (*policy)[s]) - ctx->phi(s, amin));
        }
        return g;
    }

    /// Linear coefficient of the currently active piece at theta.
    Eigen::VectorXd active_piece(const Eigen::VectorXd& theta) const {
        return subgradient(theta);
    }
};

/// Minimizes one convex block by projected subgradient with a best-iterate
/// memory, then re-solves the active linear piece exactly a few times.
inline Eigen::VectorXd solve_block(const BlockProblem& prob, Eigen::VectorXd theta,
                                   const SolveOptions& opts) {
    const ConfidenceSet& set = *prob.set;
    theta = set.project(theta);
    double best_val = prob.objective(theta);
    Eigen::VectorXd best = theta;

    Eigen::VectorXd g0 = prob.subgradient(theta);
    double gscale = g0.norm();
    if (gscale > 1e-14) {
        double diam = 2.0 * std::min(set.ball_radius,
                                     set.radius / std::sqrt(set.eigval.minCoeff()) + 1e-30);
        if (!(diam > 0.0)) diam = 1e-12;
        Eigen::VectorXd x = theta;
        double stall_best = best_val;
        int stall = 0;
        for (int t = 1; t <= opts.subgrad_iters; ++t) {
            Eigen::VectorXd g = prob.subgradient(x);
            double gn = g.norm();
            if (gn < 1e-14) break;
            double eta = diam / (gn * std::sqrt(static_cast<double>(t)));
            x = set.project(x - eta * g);
            double val = prob.objective(x);
            if (val < best_val) { best_val = val; best = x; }
            if (t % 25 == 0) {
                if (stall_best - best_val < opts.inner_tol * std::max(1.0, std::abs(best_val)))
                    ++stall;
                else
                    stall = 0;
                stall_best = best_val;
                if (stall >= 2) break;
            }
        }
    }

    for (int round = 0; round < opts.polish_rounds; ++round) {
        Eigen::VectorXd c = prob.active_piece(best);
        if (c.norm() < 1e-14) break;
        LinearMinResult lm = min_linear(set, c);
        double val = prob.objective(lm.argmin);
        if (val < best_val - 1e-15) {
            best_val = val;
            best = lm.argmin;
        } else {
            break;
        }
    }
    return best;
}

inline std::vector<Eigen::MatrixXd> make_starts(const PartyModels& models,
                                                const SolveOptions& opts) {
    const int M = static_cast<int>(models.size());
    const int d = models[0].dim();
    std::vector<Eigen::MatrixXd> starts;
    Eigen::MatrixXd center(M, d);
    for (int m = 0; m < M; ++m) center.row(m) = models[m].center;
    starts.push_back(center);
    for (int sign = -1; sign <= 1 && static_cast<int>(starts.size()) < opts.starts;
         sign += 2) {
        Eigen::MatrixXd st(M, d);
        for (int m = 0; m < M; ++m) {
            Eigen::Index jmin;
            models[m].eigval.minCoeff(&jmin);
            Eigen::VectorXd dir = models[m].eigvec.col(jmin);
            double scale = models[m].radius / std::sqrt(models[m].eigval(jmin));
            st.row(m) = models[m].project(models[m].center + sign * scale * dir);
        }
        starts.push_back(st);
    }
    Rng rng(0xA11CEULL);
    while (static_cast<int>(starts.size()) < opts.starts) {
        Eigen::MatrixXd st(M, d);
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd dir(d);
            for (int j = 0; j < d; ++j) dir(j) = rng.gaussian();
            dir.normalize();
            double scale = models[m].radius / std::sqrt(models[m].eigval.mean());
            st.row(m) = models[m].project(models[m].center + scale * dir);
        }
        starts.push_back(st);
    }
    return starts;
}

}  // namespace detail

/// Inner minimization of the expected welfare over the product of
/// confidence sets. Utilitarian decomposes into per-party linear
/// minimizations, solved in closed form or by a certified KKT polish.
/// Nash and Leximin run multi-start block-coordinate descent: each block is
/// minimized by projected subgradient followed by exact re-solves of the
/// active linear piece.
inline PessimisticValue pessimistic_value(const PartyModels& models,
                                          const ValueContext& ctx, const Policy& policy,
                                          const WelfareSpec& spec,
                                          const SolveOptions& opts = {}) {
    require(!models.empty(), "need at least one party model");
    require(models[0].dim() == ctx.feature_dim, "model dimension mismatch");
    const int M = static_cast<int>(models.size());
    const int d = ctx.feature_dim;

    PessimisticValue out;
    out.inner_thetas.resize(M, d);

    bool all_point = true;
    for (const auto& set : models)
        if (set.radius > 0.0) { all_point = false; break; }
    if (all_point) {
        for (int m = 0; m < M; ++m) out.inner_thetas.row(m) = models[m].center;
        out.value = eval_welfare(out.inner_thetas, ctx, policy, spec);
        out.certified = true;
        out.starts_used = 0;
        return out;
    }

    if (spec.kind == WelfareKind::utilitarian) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
        for (int s = 0; s < ctx.num_states; ++s)
            v += ctx.weights(s) * ctx.phi(s, policy[s]);
        double total = 0.0;
        double residual = 0.0;
        bool certified = true;
        for (int m = 0; m < M; ++m) {
            LinearMinResult lm = min_linear(models[m], v);
            total += lm.value;
            out.inner_thetas.row(m) = lm.argmin;
            residual = std::max(residual, lm.value - lm.lower_reference);
            certified = certified && lm.exact;
        }
        out.value = total;
        out.residual = residual;
        out.certified = certified;
        out.starts_used = 1;
        return out;
    }

    auto starts = detail::make_starts(models, opts);
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd best_thetas;
    double best_residual = 0.0;
    int total_sweeps = 0;

    for (const auto& st : starts) {
        Eigen::MatrixXd thetas = st;
        Eigen::MatrixXd utils(M, ctx.num_states);
        for (int m = 0; m < M; ++m) {
            Eigen::VectorXd theta = thetas.row(m);
            utils.row(m) = detail::party_utils(theta, ctx, policy, spec);
        }
        double cur = eval_welfare(thetas, ctx, policy, spec);
        double start_residual = 0.0;
        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            double prev = cur;
            for (int m = 0; m < M; ++m) {
                detail::BlockProblem prob;
                prob.set = &models[m];
                prob.ctx = &ctx;
                prob.policy = &policy;
                prob.spec = &spec;
                prob.leximin = (spec.kind == WelfareKind::leximin);
                prob.weights.resize(ctx.num_states);
                prob.caps = Eigen::VectorXd::Constant(
                    ctx.num_states, std::numeric_limits<double>::infinity());
                if (spec.kind == WelfareKind::nash) {
                    for (int s = 0; s < ctx.num_states; ++s) {
                        double w = ctx.weights(s);
                        for (int j = 0; j < M; ++j)
                            if (j != m) w *= utils(j, s);
                        prob.weights(s) = w;
                    }
                } else {
                    prob.weights = ctx.weights;
                    if (M > 1) {
                        for (int s = 0; s < ctx.num_states; ++s) {
                            double cap = std::numeric_limits<double>::infinity();
                            for (int j = 0; j < M; ++j)
                                if (j != m) cap = std::min(cap, utils(j, s));
                            prob.caps(s) = cap;
                        }
                    }
                }
                Eigen::VectorXd cand =
                    detail::solve_block(prob, thetas.row(m).transpose(), opts);
                Eigen::MatrixXd trial = thetas;
                trial.row(m) = cand.transpose();
                double trial_val = eval_welfare(trial, ctx, policy, spec);
                if (trial_val < cur) {
                    thetas = trial;
                    cur = trial_val;
                    utils.row(m) = detail::party_utils(cand, ctx, policy, spec);
                }
            }
            ++total_sweeps;
            start_residual = prev - cur;
            if (start_residual < opts.inner_tol * std::max(1.0, std::abs(cur))) break;
        }
        if (cur < best_val) {
            best_val = cur;
            best_thetas = thetas;
            best_residual = start_residual;
        }
    }

    out.value = best_val;
    out.inner_thetas = best_thetas;
    out.starts_used = static_cast<int>(starts.size());
    out.sweeps = total_sweeps;
    out.residual = best_residual;
    out.certified = false;
    return out;
}

struct PolicySolution {
    Policy policy;
    double pessimistic_value = 0.0;
    Eigen::MatrixXd inner_thetas;

    double true_value = std::numeric_limits<double>::quiet_NaN();
    double optimal_true_value = std::numeric_limits<double>::quiet_NaN();
    double suboptimality = std::numeric_limits<double>::quiet_NaN();
    Policy optimal_policy;

    std::string solver_mode;
    long policies_evaluated = 0;
    int starts_used = 0;
    double inner_residual = 0.0;
    bool inner_certified = false;
    std::vector<double> enumerated_values;
};

namespace detail {

inline bool next_policy(Policy& policy, int num_actions) {
    for (int s = static_cast<int>(policy.size()) - 1; s >= 0; --s) {
        if (++policy[s] < num_actions) return true;
        policy[s] = 0;
    }
    return false;
}

inline double policy_space_size(int num_states, int num_actions) {
    return std::pow(static_cast<double>(num_actions), num_states);
}

/// State-wise welfare of action a with all parameters fixed.
inline double state_score(const Eigen::MatrixXd& thetas, const ValueContext& ctx,
                          const WelfareSpec& spec, int s, int a) {
    double sum = 0.0;
    double prod = 1.0;
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < thetas.rows(); ++m) {
        Eigen::VectorXd theta = thetas.row(m);
        double at = theta.dot(ctx.phi(s, a));
        if (spec.kind == WelfareKind::utilitarian) {
            sum += at;
            continue;
        }
        double zero;
        if (spec.zero_reference) {
            zero = theta.dot(ctx.phi(s, (*spec.zero_reference)[s]));
        } else {
            zero = theta.dot(ctx.phi(s, 0));
            for (int b = 1; b < ctx.num_actions; ++b)
                zero = std::min(zero, theta.dot(ctx.phi(s, b)));
        }
        prod *= at - zero;
        low = std::min(low, at - zero);
    }
    switch (spec.kind) {
        case WelfareKind::utilitarian: return sum;
        case WelfareKind::nash: return prod;
        case WelfareKind::leximin: return low;
    }
    return 0.0;
}

}  // namespace detail

/// Outer maximization of the pessimistic welfare. Exact mode evaluates
/// every deterministic policy (ties broken toward the lexicographically
/// smallest action tuple); alternating mode is a heuristic that improves the
/// policy state-wise against the last inner minimizer.
inline PolicySolution solve_policy(const PartyModels& models, const ValueContext& ctx,
                                   const WelfareSpec& spec, const std::string& mode,
                                   const SolveOptions& opts = {}) {
    PolicySolution sol;
    if (mode == "exact" || mode == "exact_enumeration") {
        double space = detail::policy_space_size(ctx.num_states, ctx.num_actions);
        if (space > static_cast<double>(opts.enum_cap))
            throw ValidationError(
                "policy space exceeds the enumeration cap; use alternating mode");
        Policy policy(ctx.num_states, 0);
        bool first = true;
        Policy best_policy;
        double best_val = 0.0;
        Eigen::MatrixXd best_thetas;
        double best_residual = 0.0;
        bool best_cert = false;
        int starts_used = 0;
        do {
            PessimisticValue pv = pessimistic_value(models, ctx, policy, spec, opts);
            if (opts.record_enumeration) sol.enumerated_values.push_back(pv.value);
            ++sol.policies_evaluated;
            starts_used = pv.starts_used;
            if (first || pv.value > best_val) {
                first = false;
                best_val = pv.value;
                best_policy = policy;
                best_thetas = pv.inner_thetas;
                best_residual = pv.residual;
                best_cert = pv.certified;
            }
        } while (detail::next_policy(policy, ctx.num_actions));
        sol.policy = best_policy;
        sol.pessimistic_value = best_val;
        sol.inner_thetas = best_thetas;
        sol.inner_residual = best_residual;
        sol.inner_certified = best_cert;
        sol.starts_used = starts_used;
        sol.solver_mode = "exact_enumeration";
        return sol;
    }
    if (mode != "alt" && mode != "alternating")
        throw ValidationError("unknown solver mode: " + mode);

    const int M = static_cast<int>(models.size());
    Eigen::MatrixXd centers(M, ctx.feature_dim);
    for (int m = 0; m < M; ++m) centers.row(m) = models[m].center;
    Policy policy(ctx.num_states, 0);
    for (int s = 0; s < ctx.num_states; ++s) {
        double best = detail::state_score(centers, ctx, spec, s, 0);
        for (int a = 1; a < ctx.num_actions; ++a) {
            double v = detail::state_score(centers, ctx, spec, s, a);
            if (v > best) { best = v; policy[s] = a; }
        }
    }

    double best_val = -std::numeric_limits<double>::infinity();
    Policy best_policy = policy;
    Eigen::MatrixXd best_thetas;
    for (int it = 0; it < opts.alt_max_iters; ++it) {
        PessimisticValue pv = pessimistic_value(models, ctx, policy, spec, opts);
        ++sol.policies_evaluated;
        if (pv.value > best_val) {
            best_val = pv.value;
            best_policy = policy;
            best_thetas = pv.inner_thetas;
        }
        Policy improved(ctx.num_states, 0);
        for (int s = 0; s < ctx.num_states; ++s) {
            double best = detail::state_score(pv.inner_thetas, ctx, spec, s, 0);
            for (int a = 1; a < ctx.num_actions; ++a) {
                double v = detail::state_score(pv.inner_thetas, ctx, spec, s, a);
                if (v > best) { best = v; improved[s] = a; }
            }
        }
        if (improved == policy) break;
        policy = improved;
    }
    sol.policy = best_policy;
    sol.pessimistic_value = best_val;
    sol.inner_thetas = best_thetas;
    sol.solver_mode = "alternating";
    return sol;
}

/// Exhaustive maximizer of the true welfare; ties go to the
/// lexicographically smallest policy.
inline std::pair<Policy, double> brute_force_optimal(const CbInstance& inst,
                                                     const WelfareSpec& spec,
                                                     long enum_cap = 1000000) {
    ValueContext ctx = ValueContext::from_instance(inst);
    double space = detail::policy_space_size(ctx.num_states, ctx.num_actions);
    require(space <= static_cast<double>(enum_cap),
            "policy space exceeds the enumeration cap");
    Policy policy(ctx.num_states, 0);
    Policy best = policy;
    double best_val = eval_welfare(inst.party_params, ctx, policy, spec);
    while (detail::next_policy(policy, ctx.num_actions)) {
        double v = eval_welfare(inst.party_params, ctx, policy, spec);
        if (v > best_val) {
            best_val = v;
            best = policy;
        }
    }
    return {best, best_val};
}

/// Fills the ground-truth fields of a solution and returns
/// J(pi*) - J(pi_hat).
inline double suboptimality(const CbInstance& inst, PolicySolution& sol,
                            const WelfareSpec& spec, long enum_cap = 1000000) {
    auto [opt_policy, opt_value] = brute_force_optimal(inst, spec, enum_cap);
    sol.optimal_policy = opt_policy;
    sol.optimal_true_value = opt_value;
    sol.true_value = true_value(inst, sol.policy, spec);
    sol.suboptimality = opt_value - sol.true_value;
    return sol.suboptimality;
}

struct ConcentrabilityEntry {
    int party = 0;
    std::string policy_label;
    double value = 0.0;
};

struct ConcentrabilityReport {
    double c_star = 0.0;
    std::vector<ConcentrabilityEntry> contributions;
    Eigen::VectorXd statewise;  // C*(s)
    std::vector<bool> ridged;
};

/// Coverage-style coefficient: worst norm of expected policy features in the
/// inverse covariance metric. Utilitarian audits only the optimal policy;
/// Nash and Leximin add each party's true and pessimistic baseline policies.
inline ConcentrabilityReport concentrability(const CbInstance& inst,
                                             const PartyModels& models,
                                             const WelfareSpec& spec,
                                             const SolveOptions& opts = {}) {
    ValueContext ctx = ValueContext::from_instance(inst);
    const int M = static_cast<int>(models.size());
    auto [pi_star, star_val] = brute_force_optimal(inst, spec, opts.enum_cap);
    (void)star_val;

    ConcentrabilityReport report;
    report.statewise = Eigen::VectorXd::Zero(inst.num_states);
    for (const auto& set : models) report.ridged.push_back(set.ridged);

    std::vector<std::pair<std::string, Policy>> shared = {{"optimal", pi_star}};
    Eigen::MatrixXd inner;
    if (spec.kind != WelfareKind::utilitarian) {
        PessimisticValue pv = pessimistic_value(models, ctx, pi_star, spec, opts);
        inner = pv.inner_thetas;
    }

    auto argmin_policy = [&](const Eigen::VectorXd& theta) {
        Policy p(inst.num_states, 0);
        for (int s = 0; s < inst.num_states; ++s) {
            double best = theta.dot(inst.phi(s, 0));
            for (int a = 1; a < inst.num_actions; ++a) {
                double v = theta.dot(inst.phi(s, a));
                if (v < best) { best = v; p[s] = a; }
            }
        }
        return p;
    };

    auto inv_sqrt_norm = [&](int m, const Eigen::VectorXd& v) {
        Eigen::VectorXd w = models[m].eigvec.transpose() * v;
        double total = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j)
            total += w(j) * w(j) / models[m].eigval(j);
        return std::sqrt(total);
    };

    for (int m = 0; m < M; ++m) {
        std::vector<std::pair<std::string, Policy>> policies = shared;
        if (spec.kind != WelfareKind::utilitarian) {
            policies.push_back(
                {"true_baseline", argmin_policy(inst.party_params.row(m).transpose())});
            policies.push_back(
                {"pessimistic_baseline", argmin_policy(inner.row(m).transpose())});
        }
        for (const auto& [label, pol] : policies) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(inst.feature_dim);
            for (int s = 0; s < inst.num_states; ++s)
                v += inst.initial_dist(s) * inst.phi(s, pol[s]);
            double contrib = inv_sqrt_norm(m, v);
            report.contributions.push_back({m, label, contrib});
            report.c_star = std::max(report.c_star, contrib);
            for (int s = 0; s < inst.num_states; ++s)
                report.statewise(s) =
                    std::max(report.statewise(s), inv_sqrt_norm(m, inst.phi(s, pol[s])));
        }
    }
    return report;
}

struct StateAuditVerdict {
    int state = 0;
    bool pass = true;
    double tightest_tau = 0.0;   // smallest tau at which the state passes
    int witness_action = -1;
    int witness_party = -1;
};

/// Approximate Pareto audit on normalized rewards: a state fails at level
/// tau if some alternative action gives every party at least its current
/// normalized reward and some party strictly more than (1+tau) times it.
inline std::vector<StateAuditVerdict> audit_pareto(const CbInstance& inst,
                                                   const Policy& policy,
                                                   const std::vector<double>& taus) {
    require(static_cast<int>(policy.size()) == inst.num_states, "policy size mismatch");
    require(static_cast<int>(taus.size()) == inst.num_states, "tau vector size mismatch");
    const double tol = 1e-12;
    std::vector<StateAuditVerdict> verdicts;
    for (int s = 0; s < inst.num_states; ++s) {
        StateAuditVerdict v;
        v.state = s;
        std::vector<double> zero(inst.num_parties);
        for (int m = 0; m < inst.num_parties; ++m) zero[m] = inst.zero_reward(m, s);
        std::vector<double> cur(inst.num_parties);
        for (int m = 0; m < inst.num_parties; ++m)
            cur[m] = inst.reward(m, s, policy[s]) - zero[m];
        for (int a = 0; a < inst.num_actions; ++a) {
            if (a == policy[s]) continue;
            bool dominates = true;
            for (int m = 0; m < inst.num_parties && dominates; ++m)
                if (inst.reward(m, s, a) - zero[m] < cur[m] - tol) dominates = false;
            if (!dominates) continue;
            for (int m = 0; m < inst.num_parties; ++m) {
                double alt = inst.reward(m, s, a) - zero[m];
                double needed;
                if (cur[m] > tol) {
                    needed = alt / cur[m] - 1.0;
                } else {
                    needed = (alt > tol) ? std::numeric_limits<double>::infinity() : 0.0;
                }
                if (needed > v.tightest_tau) {
                    v.tightest_tau = needed;
                    v.witness_action = a;
                    v.witness_party = m;
                }
                bool violates = (cur[m] > tol) ? (alt > (1.0 + taus[s]) * cur[m] + tol)
                                               : (alt > tol && taus[s] < needed);
                if (violates) v.pass = false;
            }
        }
        verdicts.push_back(v);
    }
    return verdicts;
}

inline std::vector<StateAuditVerdict> audit_pareto(const CbInstance& inst,
                                                   const Policy& policy, double tau) {
    return audit_pareto(inst, policy, std::vector<double>(inst.num_states, tau));
}

struct PigouDaltonVerdict {
    int state = 0;
    bool pass = true;
    int witness_action = -1;
    int witness_i = -1;
    int witness_j = -1;
    double welfare_gain = 0.0;
};

/// Pigou-Dalton audit: flags a state when some alternative action narrows
/// the normalized-utility gap between two parties, preserves their total raw
/// reward, and still raises the Nash product by more than tau.
inline std::vector<PigouDaltonVerdict> audit_pigou_dalton(const CbInstance& inst,
                                                          const Policy& policy,
                                                          double tau) {
    require(inst.num_parties >= 2, "Pigou-Dalton audit needs at least two parties");
    require(static_cast<int>(policy.size()) == inst.num_states, "policy size mismatch");
    const double sum_tol = 1e-9;
    const double tol = 1e-12;
    std::vector<PigouDaltonVerdict> verdicts;
    for (int s = 0; s < inst.num_states; ++s) {
        PigouDaltonVerdict v;
        v.state = s;
        std::vector<double> zero(inst.num_parties);
        for (int m = 0; m < inst.num_parties; ++m) zero[m] = inst.zero_reward(m, s);
        auto product_at = [&](int a) {
            double prod = 1.0;
            for (int m = 0; m < inst.num_parties; ++m)
                prod *= inst.reward(m, s, a) - zero[m];
            return prod;
        };
        double cur_prod = product_at(policy[s]);
        for (int b = 0; b < inst.num_actions; ++b) {
            if (b == policy[s]) continue;
            for (int i = 0; i < inst.num_parties; ++i) {
                for (int j = i + 1; j < inst.num_parties; ++j) {
                    double gap_cur = std::abs((inst.reward(i, s, policy[s]) - zero[i]) -
                                              (inst.reward(j, s, policy[s]) - zero[j]));
                    double gap_alt = std::abs((inst.reward(i, s, b) - zero[i]) -
                                              (inst.reward(j, s, b) - zero[j]));
                    double sum_cur =
                        inst.reward(i, s, policy[s]) + inst.reward(j, s, policy[s]);
                    double sum_alt = inst.reward(i, s, b) + inst.reward(j, s, b);
                    if (gap_alt < gap_cur - tol &&
                        std::abs(sum_alt - sum_cur) <= sum_tol) {
                        double gain = product_at(b) - cur_prod;
                        if (gain > tau + tol) {
                            v.pass = false;
                            if (gain > v.welfare_gain) {
                                v.welfare_gain = gain;
                                v.witness_action = b;
                                v.witness_i = i;
                                v.witness_j = j;
                            }
                        }
                    }
                }
            }
        }
        verdicts.push_back(v);
    }
    return verdicts;
}

}  // namespace mpal
