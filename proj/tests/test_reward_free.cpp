#include <catch2/catch_amalgamated.hpp>

#include "mpal/instance.hpp"
#include "mpal/io.hpp"
#include "mpal/preference.hpp"

using namespace mpal;

TEST_CASE("preference matrix cells follow the win-count ratio") {
    ComparisonDataset data;
    data.num_parties = 1;
    data.per_party_n = 4;
    data.by_party.resize(1);
    // three wins for action 0 over 1, one loss
    data.by_party[0] = {{0, 0, 0, 1, 1}, {0, 0, 0, 1, 1}, {0, 0, 0, 1, 1},
                        {0, 0, 0, 1, 0}};
    PreferenceTables tab = build_tables(data, 1, 2, 0.05);
    CHECK(tab.per_party[0][0](0, 1) == Catch::Approx(0.5));
    CHECK(tab.per_party[0][0](1, 0) == Catch::Approx(-0.5));
    CHECK(tab.visit_count(0, 0, 0, 1) == 4);
}

TEST_CASE("bonus evaluates the stated formula") {
    ComparisonDataset data;
    data.num_parties = 1;
    data.per_party_n = 4;
    data.by_party.resize(1);
    data.by_party[0] = {{0, 0, 0, 1, 1}, {0, 0, 0, 1, 1}, {0, 0, 0, 1, 0},
                        {0, 0, 0, 1, 0}};
    PreferenceTables tab = build_tables(data, 1, 2, 0.05);
    // 4 M S A^2 / delta = 320; B = sqrt(2 log(320) / 4)
    double expect = std::sqrt(2.0 * std::log(320.0) / 4.0);
    CHECK(tab.bonus[0](0, 1) == Catch::Approx(expect));
    CHECK(expect == Catch::Approx(1.6984).epsilon(1e-3));
    CHECK(tab.bonus[0](0, 0) == 0.0);
    CHECK(tab.bonus[0](1, 1) == 0.0);
}

TEST_CASE("unobserved cells use the or-one floor") {
    ComparisonDataset data;
    data.num_parties = 1;
    data.per_party_n = 1;
    data.by_party.resize(1);
    data.by_party[0] = {{0, 0, 0, 1, 1}};
    PreferenceTables tab = build_tables(data, 1, 3, 0.1);
    CHECK(tab.per_party[0][0](0, 2) == 0.0);
    double expect = std::sqrt(2.0 * std::log(4.0 * 9.0 / 0.1));
    CHECK(tab.bonus[0](0, 2) == Catch::Approx(expect));
}

TEST_CASE("empirical matrices stay skew-symmetric") {
    PreferenceProfile prof = transitive_two_party_profile();
    ComparisonDataset data = sample_profile_dataset(prof, 2000, 5);
    PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
    for (int m = 0; m < 2; ++m)
        CHECK((tab.per_party[0][m] + tab.per_party[0][m].transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-14);
    CHECK((tab.aggregate[0] + tab.aggregate[0].transpose()).cwiseAbs().maxCoeff() <
          1e-14);
    CHECK((tab.truth_aggregate[0] + tab.truth_aggregate[0].transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
}

TEST_CASE("winner with zero bonus on a skew-symmetric matrix has value zero") {
    PreferenceProfile prof = rps_profile(2);
    ComparisonDataset data = sample_profile_dataset(prof, 900, 3);
    PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
    for (auto& B : tab.bonus) B.setZero();
    WinnerSolution sol = von_neumann_winner(tab);
    CHECK(std::abs(sol.values(0)) < 1e-9);
    CHECK(sol.p[0].sum() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("all-zero matrix with a large bonus still yields a distribution") {
    PreferenceTables tab;
    tab.num_states = 1;
    tab.num_actions = 3;
    tab.num_parties = 1;
    tab.aggregate = {Eigen::MatrixXd::Zero(3, 3)};
    Eigen::MatrixXd B = Eigen::MatrixXd::Constant(3, 3, 2.0);
    B.diagonal().setZero();
    tab.bonus = {B};
    WinnerSolution sol = von_neumann_winner(tab);
    CHECK(sol.p[0].sum() == Catch::Approx(1.0).margin(1e-10));
    CHECK(sol.values(0) <= 0.0 + 1e-12);
    CHECK(sol.values(0) >= -2.0 - 1e-12);
}

TEST_CASE("rps fixture: uniform winner and zero gap") {
    PreferenceProfile prof = rps_profile(3);
    PreferenceTables tab;
    tab.num_states = 1;
    tab.num_actions = 3;
    tab.num_parties = 3;
    tab.aggregate = {prof.truth_aggregate(0)};
    tab.bonus = {Eigen::MatrixXd::Zero(3, 3)};
    tab.has_truth = true;
    tab.rho = prof.initial_dist;
    tab.truth_per_party = {{prof.truth_matrix(0, 0), prof.truth_matrix(0, 1),
                            prof.truth_matrix(0, 2)}};
    tab.truth_aggregate = {prof.truth_aggregate(0)};

    WinnerSolution sol = von_neumann_winner(tab);
    for (int i = 0; i < 3; ++i)
        CHECK(sol.p[0](i) == Catch::Approx(1.0 / 3.0).margin(1e-8));
    WinnerGap gap = approx_winner_gap(sol, tab);
    CHECK(gap.aggregate == Catch::Approx(0.0).margin(1e-9));
    CHECK(gap.per_state(0) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("winner concentrates on the utilitarian action with rich data") {
    CbInstance inst = build_intro_example(0.1);
    PreferenceProfile prof = profile_from_instance(inst);
    ComparisonDataset data = sample_profile_dataset(prof, 20000, 11);
    PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
    WinnerSolution sol = von_neumann_winner(tab);
    CHECK(sol.p[0](2) >= 0.95);
}

TEST_CASE("ex-post audit distinguishes transitive and cyclic profiles") {
    SECTION("cyclic unanimity is annotated, not asserted") {
        PreferenceProfile prof = rps_profile(2);
        ComparisonDataset data = sample_profile_dataset(prof, 500, 2);
        PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
        for (auto& B : tab.bonus) B.setZero();
        tab.aggregate[0] = prof.truth_aggregate(0);
        WinnerSolution sol = von_neumann_winner(tab);
        auto verdicts = audit_expost(sol, tab, 0.1);
        CHECK_FALSE(verdicts[0].all_parties_transitive);
        CHECK_FALSE(verdicts[0].annotation.empty());
        // the uniform winner puts 1/3 on the dominated action
        REQUIRE_FALSE(verdicts[0].dominated_actions.empty());
        CHECK(verdicts[0].max_dominated_mass == Catch::Approx(1.0 / 3.0).margin(1e-6));
    }
    SECTION("transitive two-party data passes with a modest tau") {
        CbInstance inst = build_intro_example(0.1);
        PreferenceProfile prof = profile_from_instance(inst);
        ComparisonDataset data = sample_profile_dataset(prof, 20000, 4);
        PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
        WinnerSolution sol = von_neumann_winner(tab);
        auto verdicts = audit_expost(sol, tab, 0.05);
        CHECK(verdicts[0].all_parties_transitive);
        CHECK(verdicts[0].pass);
    }
    SECTION("no dominated actions is a vacuous pass") {
        PreferenceProfile prof = transitive_two_party_profile();
        ComparisonDataset data = sample_profile_dataset(prof, 1000, 8);
        PreferenceTables tab = build_tables(data, 1, 3, 0.1, &prof);
        WinnerSolution sol = von_neumann_winner(tab);
        auto verdicts = audit_expost(sol, tab, 0.0);
        CHECK(verdicts[0].dominated_actions.empty());
        CHECK(verdicts[0].pass);
    }
}

TEST_CASE("adversarial profile bound") {
    for (int M : {2, 3, 5}) {
        AdversarialProfile adv = build_prop_d2_profile(M);
        CHECK(adv.maxmin_bound <=
              -static_cast<double>(M - 1) / M + 1e-9);
        for (int m = 0; m < M; ++m) {
            Eigen::MatrixXd N = adv.profile.truth_matrix(0, m);
            CHECK((N + N.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    // M = 2: the uniform strategy achieves exactly -1/2
    AdversarialProfile two = build_prop_d2_profile(2);
    CHECK(two.maxmin_bound == Catch::Approx(-0.5).margin(1e-9));
}

TEST_CASE("transitive two-party fixture has a strictly mixed winner") {
    PreferenceProfile prof = transitive_two_party_profile();
    prof.validate();
    CHECK(is_transitive(prof.truth_matrix(0, 0)));
    CHECK(is_transitive(prof.truth_matrix(0, 1)));
    Eigen::MatrixXd N = prof.truth_aggregate(0);
    // aggregate cycle: 0 beats 1, 1 beats 2, 2 beats 0
    CHECK(N(0, 1) > 0.0);
    CHECK(N(1, 2) > 0.0);
    CHECK(N(2, 0) > 0.0);
    GameSolution game = solve_matrix_game(N);
    for (int i = 0; i < 3; ++i) CHECK(game.p(i) > 0.05);
}

TEST_CASE("product policy normalization") {
    PreferenceProfile prof = profile_from_instance(make_random_instance(3, 3, 3, 2, 2, 5));
    ComparisonDataset data = sample_profile_dataset(prof, 500, 19);
    PreferenceTables tab = build_tables(data, 3, 3, 0.1, &prof);
    WinnerSolution sol = von_neumann_winner(tab);
    double product = 1.0;
    for (const auto& p : sol.p) product *= p.sum();
    CHECK(product == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("profiles round-trip through JSON") {
    PreferenceProfile prof = transitive_two_party_profile();
    std::string text = to_json(prof).dump();
    PreferenceProfile back = profile_from_json(json::parse(text));
    CHECK(back.prob[0][0] == prof.prob[0][0]);
    CHECK(back.prob[0][1] == prof.prob[0][1]);
}
