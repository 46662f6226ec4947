#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/dataset.hpp"
#include "mpal/instance.hpp"
#include "mpal/welfare.hpp"

namespace mpal {

/// Cumulative state-visitation measure d^pi(s) = sum_h P(s_h = s | pi).
/// Total mass is the horizon; for H = 1 it equals the initial distribution.
struct OccupancyMeasure {
    Eigen::VectorXd d_pi;
};

inline OccupancyMeasure occupancy(const MdpInstance& inst, const Policy& policy) {
    require(static_cast<int>(policy.size()) == inst.num_states,
            "policy must cover every state");
    Eigen::VectorXd mu = inst.initial_dist;
    Eigen::VectorXd total = mu;
    for (int h = 0; h + 1 < inst.horizon; ++h) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(inst.num_states);
        for (int s = 0; s < inst.num_states; ++s) {
            if (mu(s) == 0.0) continue;
            next += mu(s) * inst.transitions[h]
                                .row(static_cast<Eigen::Index>(s) * inst.num_actions +
                                     policy[s])
                                .transpose();
        }
        mu = next;
        total += mu;
    }
    return {total};
}

/// Cumulative per-step feature difference between the two trajectories of a
/// record; feeds the same fit and covariance machinery as the bandit case.
inline Eigen::VectorXd trajectory_feature_diff(const TrajectoryComparisonRecord& rec,
                                               const MdpInstance& inst) {
    require(rec.traj_1.size() == rec.traj_0.size(),
            "trajectories must have equal length");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(inst.feature_dim);
    for (std::size_t h = 0; h < rec.traj_1.size(); ++h) {
        x += inst.phi(rec.traj_1[h].state, rec.traj_1[h].action);
        x -= inst.phi(rec.traj_0[h].state, rec.traj_0[h].action);
    }
    return x;
}

inline std::vector<PartyDesign> build_designs(const TrajectoryDataset& data,
                                              const MdpInstance& inst) {
    std::vector<PartyDesign> designs(data.num_parties);
    for (int m = 0; m < data.num_parties; ++m) {
        const auto& recs = data.by_party[m];
        require(!recs.empty(), "party dataset is empty");
        designs[m].X.resize(static_cast<Eigen::Index>(recs.size()), inst.feature_dim);
        designs[m].y.resize(static_cast<Eigen::Index>(recs.size()));
        for (std::size_t i = 0; i < recs.size(); ++i) {
            require(static_cast<int>(recs[i].traj_1.size()) == inst.horizon,
                    "trajectory length must equal the horizon");
            designs[m].X.row(i) = trajectory_feature_diff(recs[i], inst);
            designs[m].y(i) = recs[i].label;
        }
    }
    return designs;
}

inline ValueContext occupancy_context(const MdpInstance& inst, const Policy& policy) {
    ValueContext ctx;
    ctx.num_states = inst.num_states;
    ctx.num_actions = inst.num_actions;
    ctx.feature_dim = inst.feature_dim;
    ctx.features = inst.features;
    ctx.weights = occupancy(inst, policy).d_pi;
    return ctx;
}

/// Trajectory-wise true welfare: the bandit value with the initial
/// distribution replaced by the policy's own occupancy measure.
inline double mdp_true_value(const MdpInstance& inst, const Policy& policy,
                             const WelfareSpec& spec) {
    return eval_welfare(inst.party_params, occupancy_context(inst, policy), policy, spec);
}

inline std::pair<Policy, double> mdp_brute_force_optimal(const MdpInstance& inst,
                                                         const WelfareSpec& spec,
                                                         long enum_cap = 1000000) {
    double space =
        std::pow(static_cast<double>(inst.num_actions), inst.num_states);
    require(space <= static_cast<double>(enum_cap),
            "policy space exceeds the enumeration cap");
    Policy policy(inst.num_states, 0);
    Policy best = policy;
    double best_val = mdp_true_value(inst, policy, spec);
    while (detail::next_policy(policy, inst.num_actions)) {
        double v = mdp_true_value(inst, policy, spec);
        if (v > best_val) {
            best_val = v;
            best = policy;
        }
    }
    return {best, best_val};
}

/// Pessimistic policy search over the trajectory-wise value. The occupancy
/// measure depends on the candidate policy, so exact mode recomputes it (and
/// re-solves the inner minimization) for every candidate.
inline PolicySolution mdp_solve_policy(const MdpInstance& inst, const PartyModels& models,
                                       const WelfareSpec& spec, const std::string& mode,
                                       const SolveOptions& opts = {}) {
    PolicySolution sol;
    if (mode == "exact" || mode == "exact_enumeration") {
        double space =
            std::pow(static_cast<double>(inst.num_actions), inst.num_states);
        if (space > static_cast<double>(opts.enum_cap))
            throw ValidationError(
                "policy space exceeds the enumeration cap; use alternating mode");
        Policy policy(inst.num_states, 0);
        bool first = true;
        do {
            ValueContext ctx = occupancy_context(inst, policy);
            PessimisticValue pv = pessimistic_value(models, ctx, policy, spec, opts);
            if (opts.record_enumeration) sol.enumerated_values.push_back(pv.value);
            ++sol.policies_evaluated;
            if (first || pv.value > sol.pessimistic_value) {
                first = false;
                sol.pessimistic_value = pv.value;
                sol.policy = policy;
                sol.inner_thetas = pv.inner_thetas;
                sol.inner_residual = pv.residual;
                sol.inner_certified = pv.certified;
                sol.starts_used = pv.starts_used;
            }
        } while (detail::next_policy(policy, inst.num_actions));
        sol.solver_mode = "exact_enumeration";
        return sol;
    }
    if (mode != "alt" && mode != "alternating")
        throw ValidationError("unknown solver mode: " + mode);

    const int M = static_cast<int>(models.size());
    Eigen::MatrixXd centers(M, inst.feature_dim);
    for (int m = 0; m < M; ++m) centers.row(m) = models[m].center;
    Policy policy(inst.num_states, 0);
    {
        ValueContext ctx = occupancy_context(inst, policy);
        for (int s = 0; s < inst.num_states; ++s) {
            double best = detail::state_score(centers, ctx, spec, s, 0);
            for (int a = 1; a < inst.num_actions; ++a) {
                double v = detail::state_score(centers, ctx, spec, s, a);
                if (v > best) { best = v; policy[s] = a; }
            }
        }
    }
    double best_val = -std::numeric_limits<double>::infinity();
    Policy best_policy = policy;
    Eigen::MatrixXd best_thetas;
    for (int it = 0; it < opts.alt_max_iters; ++it) {
        ValueContext ctx = occupancy_context(inst, policy);
        PessimisticValue pv = pessimistic_value(models, ctx, policy, spec, opts);
        ++sol.policies_evaluated;
        if (pv.value > best_val) {
            best_val = pv.value;
            best_policy = policy;
            best_thetas = pv.inner_thetas;
        }
        Policy improved(inst.num_states, 0);
        for (int s = 0; s < inst.num_states; ++s) {
            double best = detail::state_score(pv.inner_thetas, ctx, spec, s, 0);
            for (int a = 1; a < inst.num_actions; ++a) {
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

inline double mdp_suboptimality(const MdpInstance& inst, PolicySolution& sol,
                                const WelfareSpec& spec, long enum_cap = 1000000) {
    auto [opt_policy, opt_value] = mdp_brute_force_optimal(inst, spec, enum_cap);
    sol.optimal_policy = opt_policy;
    sol.optimal_true_value = opt_value;
    sol.true_value = mdp_true_value(inst, sol.policy, spec);
    sol.suboptimality = opt_value - sol.true_value;
    return sol.suboptimality;
}

}  // namespace mpal
