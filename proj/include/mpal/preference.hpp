#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/dataset.hpp"
#include "mpal/instance.hpp"
#include "mpal/matrix_game.hpp"
#include "mpal/rng.hpp"

namespace mpal {

/// General (reward-free) tabular preference model: per state and party, the
/// full matrix of comparison probabilities P_m(a preferred over a' | s).
struct PreferenceProfile {
    int num_states = 0;
    int num_actions = 0;
    int num_parties = 0;
    Eigen::VectorXd initial_dist;
    std::vector<std::vector<PairChoice>> pair_gen;
    // prob[s][m](a, a') = P_m(a > a' | s); diagonal 0.5
    std::vector<std::vector<Eigen::MatrixXd>> prob;

    void validate() const {
        require(num_states > 0 && num_actions > 0 && num_parties > 0,
                "profile dimensions must be positive");
        require(initial_dist.size() == num_states, "initial distribution size mismatch");
        require(std::abs(initial_dist.sum() - 1.0) <= 1e-12 &&
                    initial_dist.minCoeff() >= 0.0,
                "initial distribution must be a probability vector");
        require(static_cast<int>(prob.size()) == num_states, "probability table size");
        for (const auto& row : prob) {
            require(static_cast<int>(row.size()) == num_parties, "per-party table size");
            for (const auto& P : row) {
                require(P.rows() == num_actions && P.cols() == num_actions,
                        "probability matrix shape");
                for (int a = 0; a < num_actions; ++a) {
                    require(std::abs(P(a, a) - 0.5) <= 1e-12,
                            "diagonal comparison probability must be 1/2");
                    for (int b = 0; b < num_actions; ++b) {
                        require(P(a, b) >= -1e-12 && P(a, b) <= 1.0 + 1e-12,
                                "comparison probability out of range");
                        require(std::abs(P(a, b) + P(b, a) - 1.0) <= 1e-12,
                                "comparison probabilities must be complementary");
                    }
                }
            }
        }
    }

    /// Population preference matrix N*_{s,m} = 2 P_m - 1 (skew-symmetric).
    Eigen::MatrixXd truth_matrix(int s, int m) const {
        return 2.0 * prob[s][m].array() - 1.0;
    }

    /// Aggregate N*_s, the party average.
    Eigen::MatrixXd truth_aggregate(int s) const {
        Eigen::MatrixXd N = Eigen::MatrixXd::Zero(num_actions, num_actions);
        for (int m = 0; m < num_parties; ++m) N += truth_matrix(s, m);
        return N / num_parties;
    }
};

/// Reward-based instances induce a profile through the comparison model.
inline PreferenceProfile profile_from_instance(const CbInstance& inst) {
    PreferenceProfile prof;
    prof.num_states = inst.num_states;
    prof.num_actions = inst.num_actions;
    prof.num_parties = inst.num_parties;
    prof.initial_dist = inst.initial_dist;
    prof.pair_gen = inst.pair_gen;
    prof.prob.assign(inst.num_states, {});
    for (int s = 0; s < inst.num_states; ++s) {
        for (int m = 0; m < inst.num_parties; ++m) {
            Eigen::MatrixXd P(inst.num_actions, inst.num_actions);
            for (int a = 0; a < inst.num_actions; ++a)
                for (int b = 0; b < inst.num_actions; ++b)
                    P(a, b) = sigmoid(inst.reward(m, s, a) - inst.reward(m, s, b));
            prof.prob[s].push_back(P);
        }
    }
    return prof;
}

/// Offline comparisons sampled from a general profile; same record format
/// and per-party seeding as the reward-based sampler.
inline ComparisonDataset sample_profile_dataset(const PreferenceProfile& prof, long n,
                                                std::uint64_t seed) {
    require(n >= 1, "n must be at least 1");
    ComparisonDataset data;
    data.num_parties = prof.num_parties;
    data.per_party_n = n;
    data.seed = seed;
    data.by_party.resize(prof.num_parties);
    for (int m = 0; m < prof.num_parties; ++m) {
        Rng rng(derive_party_seed(seed, m));
        auto& recs = data.by_party[m];
        recs.reserve(n);
        for (long i = 0; i < n; ++i) {
            double u = rng.uniform();
            double acc = 0.0;
            int s = prof.num_states - 1;
            for (int k = 0; k < prof.num_states; ++k) {
                acc += prof.initial_dist(k);
                if (u < acc) { s = k; break; }
            }
            const auto& row = prof.pair_gen[s];
            double u2 = rng.uniform();
            double acc2 = 0.0;
            const PairChoice* pc = &row.back();
            for (const auto& cand : row) {
                acc2 += cand.prob;
                if (u2 < acc2) { pc = &cand; break; }
            }
            int y = rng.bernoulli(prof.prob[s][m](pc->action_1, pc->action_0)) ? 1 : 0;
            recs.push_back({m, s, pc->action_1, pc->action_0, y});
        }
    }
    return data;
}

/// Empirical preference matrices, visit counts, and pessimistic bonuses.
struct PreferenceTables {
    int num_states = 0;
    int num_actions = 0;
    int num_parties = 0;
    double delta = 0.1;

    std::vector<std::vector<Eigen::MatrixXd>> wins;      // [s][m](a,a') = #(a > a')
    std::vector<std::vector<Eigen::MatrixXd>> per_party; // N_{s,m}
    std::vector<Eigen::MatrixXd> aggregate;              // N_s
    std::vector<Eigen::MatrixXd> bonus;                  // B_s, zero diagonal

    bool has_truth = false;
    std::vector<std::vector<Eigen::MatrixXd>> truth_per_party;  // N*_{s,m}
    std::vector<Eigen::MatrixXd> truth_aggregate;               // N*_s
    Eigen::VectorXd rho;

    long visit_count(int m, int s, int a1, int a0) const {
        return static_cast<long>(wins[s][m](a1, a0) + wins[s][m](a0, a1));
    }
};

/// Builds the empirical tables from comparison data. Cell values follow the
/// zero-count convention (0 when unobserved); the bonus uses the smallest
/// per-party visit count with the "or 1" floor and a zeroed diagonal.
inline PreferenceTables build_tables(const ComparisonDataset& data, int S, int A,
                                     double delta,
                                     const PreferenceProfile* truth = nullptr) {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    data.validate();
    const int M = data.num_parties;
    PreferenceTables tab;
    tab.num_states = S;
    tab.num_actions = A;
    tab.num_parties = M;
    tab.delta = delta;
    tab.wins.assign(S, std::vector<Eigen::MatrixXd>(M, Eigen::MatrixXd::Zero(A, A)));

    for (const auto& recs : data.by_party) {
        for (const auto& rec : recs) {
            require(rec.state >= 0 && rec.state < S && rec.action_1 >= 0 &&
                        rec.action_1 < A && rec.action_0 >= 0 && rec.action_0 < A,
                    "record outside the declared state/action space");
            if (rec.label == 1)
                tab.wins[rec.state][rec.party](rec.action_1, rec.action_0) += 1.0;
            else
                tab.wins[rec.state][rec.party](rec.action_0, rec.action_1) += 1.0;
        }
    }

    double log_term = std::log(4.0 * M * S * static_cast<double>(A) * A / delta);
    tab.per_party.assign(S, std::vector<Eigen::MatrixXd>(M, Eigen::MatrixXd::Zero(A, A)));
    tab.aggregate.assign(S, Eigen::MatrixXd::Zero(A, A));
    tab.bonus.assign(S, Eigen::MatrixXd::Zero(A, A));
    for (int s = 0; s < S; ++s) {
        for (int m = 0; m < M; ++m) {
            for (int a = 0; a < A; ++a) {
                for (int b = 0; b < A; ++b) {
                    double w = tab.wins[s][m](a, b);
                    double l = tab.wins[s][m](b, a);
                    double n0 = w + l;
                    tab.per_party[s][m](a, b) = (n0 > 0.0) ? (w - l) / n0 : 0.0;
                }
            }
            tab.per_party[s][m].diagonal().setZero();
            tab.aggregate[s] += tab.per_party[s][m];
        }
        tab.aggregate[s] /= M;
        for (int a = 0; a < A; ++a) {
            for (int b = 0; b < A; ++b) {
                if (a == b) continue;
                double min_n0 = std::numeric_limits<double>::infinity();
                for (int m = 0; m < M; ++m)
                    min_n0 = std::min(min_n0,
                                      tab.wins[s][m](a, b) + tab.wins[s][m](b, a));
                tab.bonus[s](a, b) = std::sqrt(2.0 * log_term / std::max(min_n0, 1.0));
            }
        }
    }

    if (truth) {
        require(truth->num_states == S && truth->num_actions == A &&
                    truth->num_parties == M,
                "truth profile dimensions do not match the data");
        tab.has_truth = true;
        tab.rho = truth->initial_dist;
        tab.truth_per_party.assign(S, {});
        for (int s = 0; s < S; ++s) {
            for (int m = 0; m < M; ++m)
                tab.truth_per_party[s].push_back(truth->truth_matrix(s, m));
            tab.truth_aggregate.push_back(truth->truth_aggregate(s));
        }
    }
    return tab;
}

/// Per-state max-min strategies of the pessimistic matrices N_s - B_s. The
/// mixed strategy over deterministic policies is the per-state product
/// measure, stored in factored form.
struct WinnerSolution {
    std::vector<Eigen::VectorXd> p;  // per-state winner strategy
    std::vector<Eigen::VectorXd> q;  // per-state adversary strategy
    Eigen::VectorXd values;          // per-state game value of N_s - B_s
    double tol = 0.0;
    double max_certificate_gap = 0.0;
};

inline WinnerSolution von_neumann_winner(const PreferenceTables& tab,
                                         const GameSolveOptions& opts = {}) {
    WinnerSolution sol;
    sol.tol = opts.tol;
    sol.values.resize(tab.num_states);
    for (int s = 0; s < tab.num_states; ++s) {
        GameSolution game = solve_matrix_game(tab.aggregate[s] - tab.bonus[s], opts);
        sol.p.push_back(game.p);
        sol.q.push_back(game.q);
        sol.values(s) = game.value;
        sol.max_certificate_gap = std::max(sol.max_certificate_gap, game.certificate_gap);
    }
    return sol;
}

struct WinnerGap {
    Eigen::VectorXd per_state;  // min_q p_s' N*_s q, exact over pure columns
    double aggregate = 0.0;     // rho-weighted sum; min_q p' T* q
};

/// How well the estimated winner holds up against the population matrices:
/// nonnegative means an exact winner. The aggregate uses the state-wise
/// decomposition of the total preference matrix under the product policy.
inline WinnerGap approx_winner_gap(const WinnerSolution& sol, const PreferenceTables& tab) {
    require(tab.has_truth, "ground-truth tables are required");
    WinnerGap gap;
    gap.per_state.resize(tab.num_states);
    for (int s = 0; s < tab.num_states; ++s) {
        Eigen::VectorXd payoff = tab.truth_aggregate[s].transpose() * sol.p[s];
        gap.per_state(s) = payoff.minCoeff();
        gap.aggregate += tab.rho(s) * gap.per_state(s);
    }
    return gap;
}

struct ExPostVerdict {
    int state = 0;
    std::vector<int> dominated_actions;
    double max_dominated_mass = 0.0;
    bool pass = true;
    bool all_parties_transitive = true;
    std::string annotation;
};

/// Transitivity in the row-dominance sense: a weakly preferred to b forces
/// a's whole row to dominate b's row.
inline bool is_transitive(const Eigen::MatrixXd& N) {
    const int A = static_cast<int>(N.rows());
    for (int x = 0; x < A; ++x)
        for (int y = 0; y < A; ++y) {
            if (x == y || N(x, y) < 0.0) continue;
            for (int z = 0; z < A; ++z)
                if (N(x, z) < N(y, z) - 1e-9) return false;
        }
    return true;
}

/// Ex-post efficiency audit: every Pareto-dominated action must carry
/// winner mass at most tau. States with an intransitive party are annotated
/// as outside the guarantee rather than failed.
inline std::vector<ExPostVerdict> audit_expost(const WinnerSolution& sol,
                                               const PreferenceTables& tab, double tau) {
    require(tab.has_truth, "ground-truth tables are required");
    std::vector<ExPostVerdict> verdicts;
    const int A = tab.num_actions;
    for (int s = 0; s < tab.num_states; ++s) {
        ExPostVerdict v;
        v.state = s;
        for (int m = 0; m < tab.num_parties; ++m)
            if (!is_transitive(tab.truth_per_party[s][m]))
                v.all_parties_transitive = false;
        for (int b = 0; b < A; ++b) {
            bool dominated = false;
            for (int a = 0; a < A && !dominated; ++a) {
                if (a == b) continue;
                bool weak_all = true;
                bool strict_some = false;
                for (int m = 0; m < tab.num_parties; ++m) {
                    double val = tab.truth_per_party[s][m](a, b);
                    if (val < -1e-12) { weak_all = false; break; }
                    if (val > 1e-12) strict_some = true;
                }
                if (weak_all && strict_some) dominated = true;
            }
            if (dominated) {
                v.dominated_actions.push_back(b);
                v.max_dominated_mass = std::max(v.max_dominated_mass, sol.p[s](b));
            }
        }
        if (v.max_dominated_mass > tau + 1e-12) v.pass = false;
        if (!v.all_parties_transitive) {
            v.annotation = "intransitive party preference: outside the guarantee";
        }
        verdicts.push_back(v);
    }
    return verdicts;
}

/// Deterministic cyclic profile over three alternatives (every party agrees
/// on the cycle), together with the known uniform winner.
inline PreferenceProfile rps_profile(int num_parties = 1) {
    require(num_parties >= 1, "need at least one party");
    PreferenceProfile prof;
    prof.num_states = 1;
    prof.num_actions = 3;
    prof.num_parties = num_parties;
    prof.initial_dist = Eigen::VectorXd::Ones(1);
    prof.pair_gen = {detail::uniform_unordered_pairs(3)};
    Eigen::MatrixXd P(3, 3);
    P << 0.5, 1.0, 0.0,
         0.0, 0.5, 1.0,
         1.0, 0.0, 0.5;
    prof.prob.assign(1, std::vector<Eigen::MatrixXd>(num_parties, P));
    return prof;
}

struct AdversarialProfile {
    PreferenceProfile profile;
    double maxmin_bound = 0.0;  // certified max_p min_m min_q p' N_m q
};

/// One state, M actions; party m strictly prefers its own action to all
/// others and is indifferent otherwise. No strategy can guarantee every
/// party more than -(M-1)/M.
inline AdversarialProfile build_prop_d2_profile(int M,
                                                const GameSolveOptions& opts = {}) {
    require(M >= 2, "need at least two parties");
    AdversarialProfile out;
    PreferenceProfile& prof = out.profile;
    prof.num_states = 1;
    prof.num_actions = M;
    prof.num_parties = M;
    prof.initial_dist = Eigen::VectorXd::Ones(1);
    prof.pair_gen = {detail::uniform_unordered_pairs(M)};
    prof.prob.assign(1, {});
    for (int m = 0; m < M; ++m) {
        Eigen::MatrixXd P = Eigen::MatrixXd::Constant(M, M, 0.5);
        for (int a = 0; a < M; ++a) {
            if (a == m) continue;
            P(m, a) = 1.0;
            P(a, m) = 0.0;
        }
        prof.prob[0].push_back(P);
    }

    // max_p min over every party's pure replies: one rectangular game over
    // the column-concatenated matrices.
    Eigen::MatrixXd stacked(M, M * M);
    for (int m = 0; m < M; ++m) stacked.middleCols(m * M, M) = prof.truth_matrix(0, m);
    GameSolution game = solve_matrix_game(stacked, opts);
    out.maxmin_bound = game.value;
    return out;
}

/// Two parties with opposite transitive rankings whose aggregate is cyclic,
/// so the population von Neumann winner is strictly mixed. Used for rate
/// studies where the winner gap must decay rather than hit zero.
inline PreferenceProfile transitive_two_party_profile() {
    PreferenceProfile prof;
    prof.num_states = 1;
    prof.num_actions = 3;
    prof.num_parties = 2;
    prof.initial_dist = Eigen::VectorXd::Ones(1);
    prof.pair_gen = {detail::uniform_unordered_pairs(3)};
    Eigen::MatrixXd P0(3, 3), P1(3, 3);
    // party 0 ranks 0 > 1 > 2; party 1 ranks 2 > 1 > 0
    P0 << 0.5, 0.75, 0.9,
          0.25, 0.5, 0.75,
          0.1, 0.25, 0.5;
    P1 << 0.5, 0.35, 0.005,
          0.65, 0.5, 0.35,
          0.995, 0.65, 0.5;
    prof.prob = {{P0, P1}};
    return prof;
}

}  // namespace mpal
