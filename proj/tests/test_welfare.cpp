#include <catch2/catch_amalgamated.hpp>

#include "mpal/dataset.hpp"
#include "mpal/instance.hpp"
#include "mpal/reward_fit.hpp"
#include "mpal/welfare.hpp"

using namespace mpal;

namespace {

CbInstance one_state_rewards(const std::vector<std::vector<double>>& rewards) {
    // one state, one-hot features, party parameters equal to reward rows
    CbInstance inst;
    inst.num_parties = static_cast<int>(rewards.size());
    inst.num_actions = static_cast<int>(rewards[0].size());
    inst.num_states = 1;
    inst.feature_dim = inst.num_actions;
    inst.rank = std::min(inst.num_parties, inst.feature_dim);
    inst.features = Eigen::MatrixXd::Identity(inst.num_actions, inst.num_actions);
    inst.party_params.resize(inst.num_parties, inst.feature_dim);
    for (int m = 0; m < inst.num_parties; ++m)
        for (int a = 0; a < inst.num_actions; ++a)
            inst.party_params(m, a) = rewards[m][a];
    detail::refactor_params(inst.party_params.transpose(), inst.rank,
                            inst.shared_factor, inst.party_coeffs);
    inst.param_bound = inst.party_params.rowwise().norm().maxCoeff() + 1e-9;
    inst.feature_bound = 1.0;
    inst.initial_dist = Eigen::VectorXd::Ones(1);
    inst.pair_gen = {detail::uniform_unordered_pairs(inst.num_actions)};
    return inst;
}

/// Grid oracle for the one-state Nash inner minimum. With a single state the
/// product of nonnegative per-party factors over independent sets separates,
/// so the joint minimum is the product of per-party grid minima.
double nash_grid_oracle(const PartyModels& models, const ValueContext& ctx,
                        const Policy& policy, double step) {
    double product = 1.0;
    for (const auto& set : models) {
        double reach = set.radius / std::sqrt(set.eigval.minCoeff());
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd theta(2);
        for (double x = set.center(0) - reach; x <= set.center(0) + reach; x += step) {
            for (double y = set.center(1) - reach; y <= set.center(1) + reach;
                 y += step) {
                theta << x, y;
                if (!set.contains(theta, 1e-12)) continue;
                double at = theta.dot(ctx.phi(0, policy[0]));
                double zero = theta.dot(ctx.phi(0, 0));
                for (int a = 1; a < ctx.num_actions; ++a)
                    zero = std::min(zero, theta.dot(ctx.phi(0, a)));
                best = std::min(best, at - zero);
            }
        }
        REQUIRE(std::isfinite(best));
        product *= best;
    }
    return product;
}

}  // namespace

TEST_CASE("true welfare values on the intro example") {
    CbInstance inst = build_intro_example(0.1);
    Policy all_c{2}, all_a{0};
    CHECK(true_value(inst, all_c, WelfareKind::nash) == Catch::Approx(0.81));
    CHECK(true_value(inst, all_a, WelfareKind::nash) ==
          Catch::Approx(0.0).margin(1e-12));
    CHECK(true_value(inst, all_c, WelfareKind::utilitarian) == Catch::Approx(1.8));
    CHECK(true_value(inst, all_c, WelfareKind::leximin) == Catch::Approx(0.9));
}

TEST_CASE("zero-radius pessimistic value equals the plug-in value") {
    CbInstance inst = make_random_instance(2, 3, 4, 2, 3, 42);
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    Policy policy{1, 2};
    for (WelfareKind kind :
         {WelfareKind::nash, WelfareKind::utilitarian, WelfareKind::leximin}) {
        WelfareSpec spec{kind, std::nullopt};
        PessimisticValue pv = pessimistic_value(models, ctx, policy, spec);
        CHECK(pv.value == true_value(inst, policy, kind));
        CHECK(pv.certified);
    }
}

TEST_CASE("utilitarian inner minimum: unit ellipsoid closed form") {
    ConfidenceSet set(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 2.0,
                      1.0);
    LinearMinResult lm = min_linear(set, Eigen::VectorXd::Ones(1));
    CHECK(lm.value == Catch::Approx(-1.0));
    CHECK(lm.exact);

    // same through the welfare surface: one state, one action, phi = 1
    ValueContext ctx;
    ctx.num_states = 1;
    ctx.num_actions = 1;
    ctx.feature_dim = 1;
    ctx.features = Eigen::MatrixXd::Ones(1, 1);
    ctx.weights = Eigen::VectorXd::Ones(1);
    PessimisticValue pv = pessimistic_value({set}, ctx, Policy{0},
                                            {WelfareKind::utilitarian, std::nullopt});
    CHECK(pv.value == Catch::Approx(-1.0));
    CHECK(pv.certified);
}

TEST_CASE("ball-constrained linear minimization cases") {
    // ellipsoid minimizer escapes the ball: both constraints active
    Eigen::VectorXd c(2);
    c << 0.8, 0.0;
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(2, 2);
    S(1, 1) = 0.25;
    ConfidenceSet set(c, S, 1.0, 0.9);
    Eigen::VectorXd v(2);
    v << 0.3, 1.0;
    LinearMinResult lm = min_linear(set, v);
    CHECK(set.contains(lm.argmin, 1e-8));
    CHECK(lm.value >= lm.lower_reference - 1e-9);
    // brute-force polar check on the 2D set
    double best = 1e9;
    for (double x = -1.0; x <= 1.0; x += 0.002)
        for (double y = -1.0; y <= 1.0; y += 0.002) {
            Eigen::VectorXd t(2);
            t << x, y;
            if (set.contains(t, 1e-12)) best = std::min(best, v.dot(t));
        }
    CHECK(lm.value == Catch::Approx(best).margin(2e-3));
}

TEST_CASE("nash inner minimum matches a dense grid oracle") {
    Rng rng(314);
    for (int rep = 0; rep < 3; ++rep) {
        CbInstance inst = make_random_instance(1, 3, 2, 2, 2, 5000 + rep);
        ValueContext ctx = ValueContext::from_instance(inst);
        PartyModels models;
        for (int m = 0; m < 2; ++m) {
            Eigen::MatrixXd S = Eigen::MatrixXd::Identity(2, 2);
            S(0, 0) = 0.8 + 0.4 * rng.uniform();
            S(1, 1) = 0.8 + 0.4 * rng.uniform();
            models.emplace_back(inst.party_params.row(m).transpose(), S,
                                inst.param_bound, 0.25);
        }
        Policy policy{rep % 3};
        WelfareSpec spec{WelfareKind::nash, std::nullopt};
        PessimisticValue pv = pessimistic_value(models, ctx, policy, spec);
        double oracle = nash_grid_oracle(models, ctx, policy, 0.005);
        CHECK(pv.value == Catch::Approx(oracle).margin(1e-3));
    }
}

TEST_CASE("exact solve on the intro example picks the compromise") {
    CbInstance inst = build_intro_example(0.1);
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    PolicySolution sol =
        solve_policy(models, ctx, {WelfareKind::nash, std::nullopt}, "exact");
    CHECK(sol.policy == Policy{2});
    CHECK(sol.pessimistic_value == Catch::Approx(0.81));
    CHECK(sol.solver_mode == "exact_enumeration");
}

TEST_CASE("single-party utilitarian solve is the state-wise greedy policy") {
    CbInstance inst = make_random_instance(4, 5, 3, 2, 1, 77);
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    PolicySolution sol =
        solve_policy(models, ctx, {WelfareKind::utilitarian, std::nullopt}, "exact");
    for (int s = 0; s < inst.num_states; ++s) {
        int greedy = 0;
        double best = inst.reward(0, s, 0);
        for (int a = 1; a < inst.num_actions; ++a)
            if (inst.reward(0, s, a) > best) { best = inst.reward(0, s, a); greedy = a; }
        CHECK(sol.policy[s] == greedy);
    }
}

TEST_CASE("prop D1: every welfare solution leaves a party 1/2 short") {
    CbInstance inst = build_prop_d1_instance();
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    for (WelfareKind kind :
         {WelfareKind::nash, WelfareKind::utilitarian, WelfareKind::leximin}) {
        PolicySolution sol = solve_policy(models, ctx, {kind, std::nullopt}, "exact");
        double worst = 0.0;
        for (int m = 0; m < 2; ++m) {
            double got = 0.0;
            for (int s = 0; s < 2; ++s)
                got += inst.initial_dist(s) * inst.reward(m, s, sol.policy[s]);
            worst = std::max(worst, 1.0 - got);
        }
        CHECK(worst >= 0.5 - 1e-12);
    }
}

TEST_CASE("suboptimality bookkeeping") {
    CbInstance inst = build_intro_example(0.1);
    WelfareSpec spec{WelfareKind::nash, std::nullopt};
    PolicySolution sol;
    sol.policy = {2};
    CHECK(suboptimality(inst, sol, spec) == Catch::Approx(0.0).margin(1e-12));
    PolicySolution bad;
    bad.policy = {0};
    CHECK(suboptimality(inst, bad, spec) == Catch::Approx(0.81));
    CHECK(bad.optimal_policy == Policy{2});
}

TEST_CASE("oracle equivalence at zero radius on small random instances") {
    for (int rep = 0; rep < 5; ++rep) {
        CbInstance inst = make_random_instance(2 + rep % 2, 3, 1 + rep % 3, 1, 2,
                                               600 + rep);
        PartyModels models = models_from_truth(inst);
        ValueContext ctx = ValueContext::from_instance(inst);
        for (WelfareKind kind :
             {WelfareKind::nash, WelfareKind::utilitarian, WelfareKind::leximin}) {
            WelfareSpec spec{kind, std::nullopt};
            PolicySolution sol = solve_policy(models, ctx, spec, "exact");
            auto [opt, val] = brute_force_optimal(inst, spec);
            CHECK(sol.policy == opt);
            CHECK(sol.pessimistic_value == val);
        }
    }
}

TEST_CASE("pessimism validity and the sandwich bound under coverage") {
    CbInstance inst = make_random_instance(2, 3, 3, 2, 2, 91);
    ComparisonDataset data = sample_cb_dataset(inst, 4000, 7);
    FitOptions fopts;
    fopts.k_const = 2.0;
    RewardFit fit = fit_mle(build_designs(data, inst), 3, 2, inst.param_bound, fopts);

    bool covered = true;
    for (int m = 0; m < 2; ++m)
        if (!in_confidence_set(inst.party_params.row(m).transpose(), fit, m))
            covered = false;
    REQUIRE(covered);

    PartyModels models = make_party_models(fit);
    ValueContext ctx = ValueContext::from_instance(inst);
    WelfareSpec spec{WelfareKind::nash, std::nullopt};
    SolveOptions opts;
    opts.record_enumeration = true;
    PolicySolution sol = solve_policy(models, ctx, spec, "exact", opts);

    Policy policy(inst.num_states, 0);
    std::size_t idx = 0;
    do {
        double j_true = true_value(inst, policy, spec);
        CHECK(sol.enumerated_values[idx] <= j_true + 1e-6);
        CHECK(sol.enumerated_values[idx] >= -1e-12);  // nash product stays nonnegative
        ++idx;
    } while (detail::next_policy(policy, inst.num_actions));

    double sub = suboptimality(inst, sol, spec);
    PessimisticValue at_opt = pessimistic_value(models, ctx, sol.optimal_policy, spec);
    CHECK(sub <= sol.optimal_true_value - at_opt.value + 1e-6);
}

TEST_CASE("argmax is invariant to per-party positive scaling") {
    CbInstance inst = make_random_instance(2, 3, 3, 2, 2, 313);
    ComparisonDataset data = sample_cb_dataset(inst, 1500, 5);
    RewardFit fit = fit_mle(build_designs(data, inst), 3, 2, inst.param_bound);
    ValueContext ctx = ValueContext::from_instance(inst);
    WelfareSpec spec{WelfareKind::nash, std::nullopt};

    PartyModels base = make_party_models(fit);
    PolicySolution plain = solve_policy(base, ctx, spec, "exact");

    const double c = 3.7;
    PartyModels scaled = base;
    scaled[0] = ConfidenceSet(c * fit.theta_hat.row(0).transpose(), fit.sigma[0],
                              c * fit.param_bound, c * fit.gamma);
    PolicySolution stretched = solve_policy(scaled, ctx, spec, "exact");
    CHECK(stretched.policy == plain.policy);
    CHECK(stretched.pessimistic_value ==
          Catch::Approx(c * plain.pessimistic_value).epsilon(1e-4));
}

TEST_CASE("utilitarian argmax ignores per-party constant offsets "
          "(intercept fixtures)") {
    RandomInstanceOptions ropts;
    ropts.with_intercept = true;
    CbInstance inst = make_random_instance(3, 4, 5, 2, 2, 55, ropts);
    WelfareSpec spec{WelfareKind::utilitarian, std::nullopt};
    auto [opt, val] = brute_force_optimal(inst, spec);

    CbInstance shifted = inst;
    shifted.party_params(0, 0) += 2.5;  // adds 2.5 to every reward of party 0
    shifted.param_bound += 2.5;
    detail::refactor_params(shifted.party_params.transpose(), shifted.rank,
                            shifted.shared_factor, shifted.party_coeffs);
    auto [opt2, val2] = brute_force_optimal(shifted, spec);
    CHECK(opt2 == opt);
    CHECK(val2 == Catch::Approx(val + 2.5));
}

TEST_CASE("alternating mode finds the exact answer on an easy instance") {
    CbInstance inst = build_intro_example(0.2);
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    WelfareSpec spec{WelfareKind::nash, std::nullopt};
    PolicySolution alt = solve_policy(models, ctx, spec, "alt");
    CHECK(alt.policy == Policy{2});
    CHECK(alt.solver_mode == "alternating");
    CHECK_THROWS_AS(solve_policy(models, ctx, spec, "bogus"), ValidationError);
}

TEST_CASE("enumeration cap errors instruct the alternating mode") {
    CbInstance inst = make_random_instance(8, 10, 3, 2, 2, 1);
    PartyModels models = models_from_truth(inst);
    ValueContext ctx = ValueContext::from_instance(inst);
    SolveOptions opts;
    opts.enum_cap = 1000;
    CHECK_THROWS_AS(
        solve_policy(models, ctx, {WelfareKind::nash, std::nullopt}, "exact", opts),
        ValidationError);
}

TEST_CASE("concentrability on identity covariance") {
    CbInstance inst = one_state_rewards({{1.0, 0.4}, {0.2, 0.9}});
    PartyModels models = models_from_truth(inst);  // identity seminorm
    WelfareSpec util{WelfareKind::utilitarian, std::nullopt};
    ConcentrabilityReport rep = concentrability(inst, models, util);
    for (const auto& e : rep.contributions) CHECK(e.policy_label == "optimal");
    // one-hot features: every expected policy feature has unit norm
    CHECK(rep.c_star == Catch::Approx(1.0));

    WelfareSpec nash{WelfareKind::nash, std::nullopt};
    ConcentrabilityReport rep2 = concentrability(inst, models, nash);
    CHECK(rep2.c_star == Catch::Approx(1.0));
    bool has_baseline = false;
    for (const auto& e : rep2.contributions)
        if (e.policy_label == "pessimistic_baseline") has_baseline = true;
    CHECK(has_baseline);
    CHECK(rep2.statewise(0) == Catch::Approx(1.0));
}

TEST_CASE("pareto audit on the intro example and simple fixtures") {
    CbInstance inst = build_intro_example(0.1);
    SECTION("all-A policy is not dominated") {
        auto verdicts = audit_pareto(inst, Policy{0}, 0.0);
        CHECK(verdicts[0].pass);
    }
    SECTION("the optimal compromise passes") {
        auto verdicts = audit_pareto(inst, Policy{2}, 0.0);
        CHECK(verdicts[0].pass);
    }
    SECTION("single-party greedy passes at any tau") {
        CbInstance solo = make_random_instance(3, 4, 3, 2, 1, 8);
        Policy greedy(3, 0);
        for (int s = 0; s < 3; ++s)
            for (int a = 1; a < 4; ++a)
                if (solo.reward(0, s, a) > solo.reward(0, s, greedy[s])) greedy[s] = a;
        auto verdicts = audit_pareto(solo, greedy, 0.0);
        for (const auto& v : verdicts) CHECK(v.pass);
    }
    SECTION("a dominated policy fails below its tightest tau") {
        CbInstance fix = one_state_rewards({{2.0, 3.0, 0.0}, {2.0, 3.0, 0.0}});
        auto fail = audit_pareto(fix, Policy{0}, 0.4);
        CHECK_FALSE(fail[0].pass);
        CHECK(fail[0].tightest_tau == Catch::Approx(0.5));
        auto pass = audit_pareto(fix, Policy{0}, 0.6);
        CHECK(pass[0].pass);
    }
    SECTION("true optimum passes on random instances") {
        for (int rep = 0; rep < 5; ++rep) {
            CbInstance rnd = make_random_instance(3, 4, 3, 2, 3, 700 + rep);
            auto [opt, val] = brute_force_optimal(rnd, {WelfareKind::nash, std::nullopt});
            auto verdicts = audit_pareto(rnd, opt, 0.0);
            for (const auto& v : verdicts) CHECK(v.pass);
        }
    }
}

TEST_CASE("pigou-dalton audit") {
    SECTION("identical parties have nothing to transfer") {
        CbInstance sym = one_state_rewards({{1.0, 0.5}, {1.0, 0.5}});
        auto verdicts = audit_pigou_dalton(sym, Policy{0}, 0.0);
        CHECK(verdicts[0].pass);
    }
    SECTION("an equalizing sum-preserving move is flagged") {
        CbInstance fix = one_state_rewards({{0.9, 0.5, 0.0}, {0.1, 0.5, 0.0}});
        auto fail = audit_pigou_dalton(fix, Policy{0}, 0.0);
        CHECK_FALSE(fail[0].pass);
        CHECK(fail[0].witness_action == 1);
        CHECK(fail[0].welfare_gain == Catch::Approx(0.16));
        auto pass = audit_pigou_dalton(fix, Policy{0}, 0.2);
        CHECK(pass[0].pass);
    }
    SECTION("the nash optimum passes at tau zero") {
        for (int rep = 0; rep < 5; ++rep) {
            CbInstance rnd = make_random_instance(2, 4, 3, 2, 2, 800 + rep);
            auto [opt, val] = brute_force_optimal(rnd, {WelfareKind::nash, std::nullopt});
            auto verdicts = audit_pigou_dalton(rnd, opt, 0.0);
            for (const auto& v : verdicts) CHECK(v.pass);
        }
    }
}

TEST_CASE("reference-policy zero reward option") {
    CbInstance inst = build_intro_example(0.1);
    Policy ref{0};  // measure against always-A
    WelfareSpec spec{WelfareKind::nash, ref};
    // party 1: R(C) - R(A) = -0.1; party 2: 0.9 - 0 = 0.9
    CHECK(true_value(inst, Policy{2}, spec) == Catch::Approx(-0.09));
    CHECK(true_value(inst, Policy{0}, spec) == Catch::Approx(0.0).margin(1e-12));
}
