#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mpal/common.hpp"
#include "mpal/instance.hpp"
#include "mpal/rng.hpp"

namespace mpal {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ComparisonRecord {
    int party = 0;
    int state = 0;
    int action_1 = 0;
    int action_0 = 0;
    int label = 0;  // 1 iff action_1 preferred
};

/// Equal-budget pairwise-comparison data: exactly n records per party.
struct ComparisonDataset {
    int num_parties = 0;
    long per_party_n = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<ComparisonRecord>> by_party;

    long total_records() const {
        long total = 0;
        for (const auto& recs : by_party) total += static_cast<long>(recs.size());
        return total;
    }

    void validate() const {
        require(static_cast<int>(by_party.size()) == num_parties,
                "dataset party count mismatch");
        for (const auto& recs : by_party)
            require(static_cast<long>(recs.size()) == per_party_n,
                    "every party must hold exactly n records");
    }
};

struct TrajectoryStep {
    int state = 0;
    int action = 0;
};

struct TrajectoryComparisonRecord {
    int party = 0;
    int initial_state = 0;
    std::vector<TrajectoryStep> traj_1;
    std::vector<TrajectoryStep> traj_0;
    int label = 0;
};

struct TrajectoryDataset {
    int num_parties = 0;
    long per_party_n = 0;
    int horizon = 1;
    std::uint64_t seed = 0;
    std::vector<std::vector<TrajectoryComparisonRecord>> by_party;
};

/// P(prefer action_1) under the comparison model: sigmoid of the reward gap.
inline double label_prob(const CbInstance& inst, int m, int s, int a1, int a0) {
    return sigmoid(inst.reward(m, s, a1) - inst.reward(m, s, a0));
}

namespace detail {

inline int sample_state(const CbInstance& inst, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (int s = 0; s < inst.num_states; ++s) {
        acc += inst.initial_dist(s);
        if (u < acc) return s;
    }
    return inst.num_states - 1;
}

inline const PairChoice& sample_pair(const CbInstance& inst, int s, Rng& rng) {
    const auto& row = inst.pair_gen[s];
    double u = rng.uniform();
    double acc = 0.0;
    for (const auto& pc : row) {
        acc += pc.prob;
        if (u < acc) return pc;
    }
    return row.back();
}

}  // namespace detail

/// Offline dataset sampled i.i.d. from the instance's generation
/// distribution, labels from the pairwise comparison model. Deterministic
/// given (instance, n, seed); parties use independent derived streams.
inline ComparisonDataset sample_cb_dataset(const CbInstance& inst, long n,
                                           std::uint64_t seed) {
    require(n >= 1, "n must be at least 1");
    ComparisonDataset data;
    data.num_parties = inst.num_parties;
    data.per_party_n = n;
    data.seed = seed;
    data.by_party.resize(inst.num_parties);
    for (int m = 0; m < inst.num_parties; ++m) {
        Rng rng(derive_party_seed(seed, m));
        auto& recs = data.by_party[m];
        recs.reserve(n);
        for (long i = 0; i < n; ++i) {
            int s = detail::sample_state(inst, rng);
            const PairChoice& pc = detail::sample_pair(inst, s, rng);
            int y = rng.bernoulli(label_prob(inst, m, s, pc.action_1, pc.action_0)) ? 1 : 0;
            recs.push_back({m, s, pc.action_1, pc.action_0, y});
        }
    }
    return data;
}

/// Designed-pairs dataset: emits exactly the requested number of records per
/// (state, pair) cell for every party, in cell order.
inline ComparisonDataset sample_cb_dataset_designed(
    const CbInstance& inst, const std::vector<DesignedCell>& counts,
    std::uint64_t seed) {
    for (const auto& c : counts) {
        require(c.count >= 0, "designed counts must be nonnegative");
        require(c.state >= 0 && c.state < inst.num_states, "designed cell state out of range");
        require(c.action_1 >= 0 && c.action_1 < inst.num_actions &&
                    c.action_0 >= 0 && c.action_0 < inst.num_actions,
                "designed cell references an unknown action");
    }
    ComparisonDataset data;
    data.num_parties = inst.num_parties;
    data.seed = seed;
    data.by_party.resize(inst.num_parties);
    for (int m = 0; m < inst.num_parties; ++m) {
        Rng rng(derive_party_seed(seed, m));
        auto& recs = data.by_party[m];
        for (const auto& c : counts) {
            double p = label_prob(inst, m, c.state, c.action_1, c.action_0);
            for (long i = 0; i < c.count; ++i) {
                int y = rng.bernoulli(p) ? 1 : 0;
                recs.push_back({m, c.state, c.action_1, c.action_0, y});
            }
        }
    }
    data.per_party_n = static_cast<long>(data.by_party.empty() ? 0 : data.by_party[0].size());
    return data;
}

/// Trajectory-comparison dataset: two independent uniform-action rollouts
/// from a shared initial state; the label's logit is the difference of
/// cumulative true rewards along the two trajectories.
inline TrajectoryDataset sample_mdp_dataset(const MdpInstance& inst, long n,
                                            std::uint64_t seed) {
    require(n >= 1, "n must be at least 1");
    TrajectoryDataset data;
    data.num_parties = inst.num_parties;
    data.per_party_n = n;
    data.horizon = inst.horizon;
    data.seed = seed;
    data.by_party.resize(inst.num_parties);

    auto rollout = [&](int m, int s0, Rng& rng, double& cum_reward) {
        std::vector<TrajectoryStep> traj;
        traj.reserve(inst.horizon);
        int s = s0;
        cum_reward = 0.0;
        for (int h = 0; h < inst.horizon; ++h) {
            int a = rng.uniform_int(inst.num_actions);
            traj.push_back({s, a});
            cum_reward += inst.reward(m, s, a);
            if (h + 1 < inst.horizon) {
                const auto& row = inst.transitions[h].row(
                    static_cast<Eigen::Index>(s) * inst.num_actions + a);
                double u = rng.uniform();
                double acc = 0.0;
                int nxt = inst.num_states - 1;
                for (int s2 = 0; s2 < inst.num_states; ++s2) {
                    acc += row(s2);
                    if (u < acc) { nxt = s2; break; }
                }
                s = nxt;
            }
        }
        return traj;
    };

    for (int m = 0; m < inst.num_parties; ++m) {
        Rng rng(derive_party_seed(seed, m));
        auto& recs = data.by_party[m];
        recs.reserve(n);
        for (long i = 0; i < n; ++i) {
            double u = rng.uniform();
            double acc = 0.0;
            int s0 = inst.num_states - 1;
            for (int s = 0; s < inst.num_states; ++s) {
                acc += inst.initial_dist(s);
                if (u < acc) { s0 = s; break; }
            }
            double r1 = 0.0, r0 = 0.0;
            TrajectoryComparisonRecord rec;
            rec.party = m;
            rec.initial_state = s0;
            rec.traj_1 = rollout(m, s0, rng, r1);
            rec.traj_0 = rollout(m, s0, rng, r0);
            rec.label = rng.bernoulli(sigmoid(r1 - r0)) ? 1 : 0;
            recs.push_back(std::move(rec));
        }
    }
    return data;
}

}  // namespace mpal
