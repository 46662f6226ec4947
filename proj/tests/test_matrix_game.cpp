#include <catch2/catch_amalgamated.hpp>

#include "mpal/matrix_game.hpp"
#include "mpal/rng.hpp"

using namespace mpal;

TEST_CASE("trivial one-by-one game") {
    Eigen::MatrixXd M(1, 1);
    M << 0.0;
    GameSolution sol = solve_matrix_game(M);
    CHECK(sol.p(0) == Catch::Approx(1.0));
    CHECK(sol.q(0) == Catch::Approx(1.0));
    CHECK(sol.value == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("cyclic three-action game has the uniform winner") {
    Eigen::MatrixXd M(3, 3);
    M << 0, 1, -1,
        -1, 0, 1,
         1, -1, 0;
    GameSolution sol = solve_matrix_game(M);
    for (int i = 0; i < 3; ++i) CHECK(sol.p(i) == Catch::Approx(1.0 / 3.0).margin(1e-8));
    CHECK(std::abs(sol.value) < 1e-9);
    CHECK(sol.certificate_gap <= 1e-9);
}

TEST_CASE("dominant pure strategy") {
    Eigen::MatrixXd M(2, 2);
    M << 0, 2,
        -2, 0;
    GameSolution sol = solve_matrix_game(M);
    CHECK(sol.p(0) == Catch::Approx(1.0));
    CHECK(sol.p(1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(sol.value == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("certificates hold on random games") {
    Rng rng(4242);
    for (int rep = 0; rep < 25; ++rep) {
        int n = 2 + rng.uniform_int(6);
        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = 2.0 * rng.uniform() - 1.0;
        GameSolution sol = solve_matrix_game(M);
        Eigen::VectorXd rp = M.transpose() * sol.p;
        Eigen::VectorXd cp = M * sol.q;
        CHECK(rp.minCoeff() >= sol.value - 1e-9);
        CHECK(cp.maxCoeff() <= sol.value + 1e-9);
        CHECK(sol.p.minCoeff() >= 0.0);
        CHECK(sol.p.sum() == Catch::Approx(1.0).margin(1e-10));
        CHECK(sol.q.sum() == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("skew-symmetric games have value zero") {
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        int n = 2 + rng.uniform_int(5);
        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < n; ++i) {
            M(i, i) = 0.0;
            for (int j = i + 1; j < n; ++j) {
                double v = 2.0 * rng.uniform() - 1.0;
                M(i, j) = v;
                M(j, i) = -v;
            }
        }
        GameSolution sol = solve_matrix_game(M);
        CHECK(std::abs(sol.value) < 1e-9);
    }
}

TEST_CASE("rectangular games are supported") {
    // row player guarantees the best column-wise minimum of a 2 x 3 game
    Eigen::MatrixXd M(2, 3);
    M << 1.0, -1.0, 0.5,
        -1.0, 1.0, 0.5;
    GameSolution sol = solve_matrix_game(M);
    CHECK(sol.value == Catch::Approx(0.0).margin(1e-9));
    CHECK(sol.p(0) == Catch::Approx(0.5).margin(1e-8));
}

TEST_CASE("multiplicative weights fallback") {
    Eigen::MatrixXd M(3, 3);
    M << 0, 1, -1,
        -1, 0, 1,
         1, -1, 0;
    GameSolveOptions opts;
    opts.force_mw = true;
    opts.tol = 1e-3;
    GameSolution sol = solve_matrix_game(M, opts);
    CHECK(sol.method == "multiplicative_weights");
    for (int i = 0; i < 3; ++i)
        CHECK(sol.p(i) == Catch::Approx(1.0 / 3.0).margin(5e-3));
    CHECK(sol.certificate_gap <= 1e-3);
}

TEST_CASE("budget exhaustion raises a solver error") {
    Eigen::MatrixXd M(4, 4);
    M << 0, 1, -1, 0.3,
        -1, 0, 1, -0.2,
         1, -1, 0, 0.1,
        -0.3, 0.2, -0.1, 0;
    GameSolveOptions opts;
    opts.force_mw = true;
    opts.tol = 1e-10;  // unreachable for the fallback
    opts.mw_cap = 50;
    CHECK_THROWS_AS(solve_matrix_game(M, opts), SolverError);
}
