#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpal/common.hpp"
#include "mpal/dataset.hpp"
#include "mpal/instance.hpp"
#include "mpal/preference.hpp"
#include "mpal/reward_fit.hpp"
#include "mpal/welfare.hpp"

namespace mpal {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    require(j.is_array() && !j.empty(), "expected a non-empty matrix");
    Eigen::MatrixXd m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].size() == j[0].size(), "ragged matrix rows");
        for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

inline json pair_gen_to_json(const std::vector<std::vector<PairChoice>>& pg) {
    json states = json::array();
    for (const auto& row : pg) {
        json entries = json::array();
        for (const auto& pc : row)
            entries.push_back({{"a1", pc.action_1}, {"a0", pc.action_0}, {"p", pc.prob}});
        states.push_back(std::move(entries));
    }
    return states;
}

inline std::vector<std::vector<PairChoice>> pair_gen_from_json(const json& j) {
    std::vector<std::vector<PairChoice>> pg;
    for (const auto& row : j) {
        std::vector<PairChoice> entries;
        for (const auto& e : row)
            entries.push_back({e.at("a1").get<int>(), e.at("a0").get<int>(),
                               e.at("p").get<double>()});
        pg.push_back(std::move(entries));
    }
    return pg;
}

// ---------------------------------------------------------------------------
// instances

inline json to_json(const CbInstance& inst) {
    return json{{"schema", "cb-instance/v1"},
                {"num_states", inst.num_states},
                {"num_actions", inst.num_actions},
                {"feature_dim", inst.feature_dim},
                {"rank", inst.rank},
                {"num_parties", inst.num_parties},
                {"param_bound", inst.param_bound},
                {"feature_bound", inst.feature_bound},
                {"features", matrix_to_json(inst.features)},
                {"shared_factor", matrix_to_json(inst.shared_factor)},
                {"party_coeffs", matrix_to_json(inst.party_coeffs)},
                {"party_params", matrix_to_json(inst.party_params)},
                {"initial_dist", vector_to_json(inst.initial_dist)},
                {"pair_gen", pair_gen_to_json(inst.pair_gen)}};
}

inline CbInstance cb_instance_from_json(const json& j) {
    require(j.value("schema", "") == std::string("cb-instance/v1"),
            "expected schema cb-instance/v1");
    CbInstance inst;
    inst.num_states = j.at("num_states").get<int>();
    inst.num_actions = j.at("num_actions").get<int>();
    inst.feature_dim = j.at("feature_dim").get<int>();
    inst.rank = j.at("rank").get<int>();
    inst.num_parties = j.at("num_parties").get<int>();
    inst.param_bound = j.at("param_bound").get<double>();
    inst.feature_bound = j.at("feature_bound").get<double>();
    inst.features = matrix_from_json(j.at("features"));
    inst.shared_factor = matrix_from_json(j.at("shared_factor"));
    inst.party_coeffs = matrix_from_json(j.at("party_coeffs"));
    inst.party_params = matrix_from_json(j.at("party_params"));
    inst.initial_dist = vector_from_json(j.at("initial_dist"));
    inst.pair_gen = pair_gen_from_json(j.at("pair_gen"));
    inst.validate();
    return inst;
}

inline json to_json(const MdpInstance& inst) {
    json transitions = json::array();
    for (const auto& T : inst.transitions) transitions.push_back(matrix_to_json(T));
    return json{{"schema", "mdp-instance/v1"},
                {"num_states", inst.num_states},
                {"num_actions", inst.num_actions},
                {"feature_dim", inst.feature_dim},
                {"rank", inst.rank},
                {"num_parties", inst.num_parties},
                {"horizon", inst.horizon},
                {"param_bound", inst.param_bound},
                {"feature_bound", inst.feature_bound},
                {"features", matrix_to_json(inst.features)},
                {"shared_factor", matrix_to_json(inst.shared_factor)},
                {"party_coeffs", matrix_to_json(inst.party_coeffs)},
                {"party_params", matrix_to_json(inst.party_params)},
                {"initial_dist", vector_to_json(inst.initial_dist)},
                {"transitions", transitions},
                {"trajectory_pair_gen", "uniform_rollout"}};
}

inline MdpInstance mdp_instance_from_json(const json& j) {
    require(j.value("schema", "") == std::string("mdp-instance/v1"),
            "expected schema mdp-instance/v1");
    MdpInstance inst;
    inst.num_states = j.at("num_states").get<int>();
    inst.num_actions = j.at("num_actions").get<int>();
    inst.feature_dim = j.at("feature_dim").get<int>();
    inst.rank = j.at("rank").get<int>();
    inst.num_parties = j.at("num_parties").get<int>();
    inst.horizon = j.at("horizon").get<int>();
    inst.param_bound = j.at("param_bound").get<double>();
    inst.feature_bound = j.at("feature_bound").get<double>();
    inst.features = matrix_from_json(j.at("features"));
    inst.shared_factor = matrix_from_json(j.at("shared_factor"));
    inst.party_coeffs = matrix_from_json(j.at("party_coeffs"));
    inst.party_params = matrix_from_json(j.at("party_params"));
    inst.initial_dist = vector_from_json(j.at("initial_dist"));
    for (const auto& t : j.at("transitions"))
        inst.transitions.push_back(matrix_from_json(t));
    inst.validate();
    return inst;
}

inline json to_json(const PreferenceProfile& prof) {
    json prob = json::array();
    for (int s = 0; s < prof.num_states; ++s) {
        json per_party = json::array();
        for (int m = 0; m < prof.num_parties; ++m)
            per_party.push_back(matrix_to_json(prof.prob[s][m]));
        prob.push_back(std::move(per_party));
    }
    return json{{"schema", "pref-profile/v1"},
                {"num_states", prof.num_states},
                {"num_actions", prof.num_actions},
                {"num_parties", prof.num_parties},
                {"initial_dist", vector_to_json(prof.initial_dist)},
                {"pair_gen", pair_gen_to_json(prof.pair_gen)},
                {"prob", prob}};
}

inline PreferenceProfile profile_from_json(const json& j) {
    require(j.value("schema", "") == std::string("pref-profile/v1"),
            "expected schema pref-profile/v1");
    PreferenceProfile prof;
    prof.num_states = j.at("num_states").get<int>();
    prof.num_actions = j.at("num_actions").get<int>();
    prof.num_parties = j.at("num_parties").get<int>();
    prof.initial_dist = vector_from_json(j.at("initial_dist"));
    prof.pair_gen = pair_gen_from_json(j.at("pair_gen"));
    prof.prob.assign(prof.num_states, {});
    const auto& prob = j.at("prob");
    for (int s = 0; s < prof.num_states; ++s)
        for (int m = 0; m < prof.num_parties; ++m)
            prof.prob[s].push_back(matrix_from_json(prob.at(s).at(m)));
    prof.validate();
    return prof;
}

/// Any of the three instance file kinds, keyed by the schema field.
struct LoadedInstance {
    std::optional<CbInstance> bandit;
    std::optional<MdpInstance> mdp;
    std::optional<PreferenceProfile> profile;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump(2) << "\n";
}

inline LoadedInstance load_instance_file(const std::string& path) {
    json j = read_json_file(path);
    std::string schema = j.value("schema", "");
    LoadedInstance out;
    if (schema == "cb-instance/v1")
        out.bandit = cb_instance_from_json(j);
    else if (schema == "mdp-instance/v1")
        out.mdp = mdp_instance_from_json(j);
    else if (schema == "pref-profile/v1")
        out.profile = profile_from_json(j);
    else
        throw ValidationError("unknown instance schema: '" + schema + "' in " + path);
    return out;
}

// ---------------------------------------------------------------------------
// datasets (JSON lines; first line is the header)

inline void write_cb_dataset(const std::string& path, const ComparisonDataset& data) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    json header{{"schema", "cbdata/v1"},
                {"num_parties", data.num_parties},
                {"per_party_n", data.per_party_n},
                {"seed", data.seed}};
    out << header.dump() << "\n";
    for (const auto& recs : data.by_party)
        for (const auto& rec : recs) {
            json line{{"party", rec.party},
                      {"state", rec.state},
                      {"action_1", rec.action_1},
                      {"action_0", rec.action_0},
                      {"label", rec.label}};
            out << line.dump() << "\n";
        }
}

inline ComparisonDataset read_cb_dataset(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty dataset file: " + path);
    json header = json::parse(line);
    require(header.value("schema", "") == std::string("cbdata/v1"),
            "expected schema cbdata/v1");
    ComparisonDataset data;
    data.num_parties = header.at("num_parties").get<int>();
    data.per_party_n = header.at("per_party_n").get<long>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.by_party.resize(data.num_parties);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ComparisonRecord rec{j.at("party").get<int>(), j.at("state").get<int>(),
                             j.at("action_1").get<int>(), j.at("action_0").get<int>(),
                             j.at("label").get<int>()};
        require(rec.party >= 0 && rec.party < data.num_parties,
                "record party out of range");
        data.by_party[rec.party].push_back(rec);
    }
    data.validate();
    return data;
}

/// Dimension consistency of a dataset against the instance it came from.
inline void check_dataset_against(const ComparisonDataset& data, int num_states,
                                  int num_actions, int num_parties) {
    require(data.num_parties == num_parties, "dataset party count mismatch");
    for (const auto& recs : data.by_party)
        for (const auto& rec : recs)
            require(rec.state >= 0 && rec.state < num_states && rec.action_1 >= 0 &&
                        rec.action_1 < num_actions && rec.action_0 >= 0 &&
                        rec.action_0 < num_actions,
                    "dataset record outside the instance's state/action space");
}

inline void write_mdp_dataset(const std::string& path, const TrajectoryDataset& data) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    json header{{"schema", "mdpdata/v1"},
                {"num_parties", data.num_parties},
                {"per_party_n", data.per_party_n},
                {"horizon", data.horizon},
                {"seed", data.seed}};
    out << header.dump() << "\n";
    auto traj_json = [](const std::vector<TrajectoryStep>& t) {
        json arr = json::array();
        for (const auto& step : t) arr.push_back({step.state, step.action});
        return arr;
    };
    for (const auto& recs : data.by_party)
        for (const auto& rec : recs) {
            json line{{"party", rec.party},
                      {"state", rec.initial_state},
                      {"traj_1", traj_json(rec.traj_1)},
                      {"traj_0", traj_json(rec.traj_0)},
                      {"label", rec.label}};
            out << line.dump() << "\n";
        }
}

inline TrajectoryDataset read_mdp_dataset(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty dataset file: " + path);
    json header = json::parse(line);
    require(header.value("schema", "") == std::string("mdpdata/v1"),
            "expected schema mdpdata/v1");
    TrajectoryDataset data;
    data.num_parties = header.at("num_parties").get<int>();
    data.per_party_n = header.at("per_party_n").get<long>();
    data.horizon = header.at("horizon").get<int>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.by_party.resize(data.num_parties);
    auto traj_parse = [&](const json& arr) {
        std::vector<TrajectoryStep> t;
        for (const auto& step : arr)
            t.push_back({step.at(0).get<int>(), step.at(1).get<int>()});
        require(static_cast<int>(t.size()) == data.horizon,
                "trajectory length does not match the horizon");
        return t;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        TrajectoryComparisonRecord rec;
        rec.party = j.at("party").get<int>();
        rec.initial_state = j.at("state").get<int>();
        rec.traj_1 = traj_parse(j.at("traj_1"));
        rec.traj_0 = traj_parse(j.at("traj_0"));
        rec.label = j.at("label").get<int>();
        require(rec.party >= 0 && rec.party < data.num_parties,
                "record party out of range");
        data.by_party[rec.party].push_back(std::move(rec));
    }
    return data;
}

// ---------------------------------------------------------------------------
// fits, solutions, winners

inline json to_json(const RewardFit& fit) {
    json sigmas = json::array();
    for (const auto& S : fit.sigma) sigmas.push_back(matrix_to_json(S));
    json trace = json::array();
    for (const auto& [it, loss] : fit.loss_trace) trace.push_back({it, loss});
    return json{{"schema", "reward-fit/v1"},
                {"feature_dim", fit.feature_dim},
                {"rank", fit.rank},
                {"num_parties", fit.num_parties},
                {"per_party_n", fit.per_party_n},
                {"param_bound", fit.param_bound},
                {"U_hat", matrix_to_json(fit.U_hat)},
                {"alpha_hat", matrix_to_json(fit.alpha_hat)},
                {"theta_hat", matrix_to_json(fit.theta_hat)},
                {"sigma", sigmas},
                {"gamma", fit.gamma},
                {"loss_trace", trace},
                {"converged", fit.converged},
                {"final_grad_norm", fit.final_grad_norm}};
}

inline RewardFit reward_fit_from_json(const json& j) {
    require(j.value("schema", "") == std::string("reward-fit/v1"),
            "expected schema reward-fit/v1");
    RewardFit fit;
    fit.feature_dim = j.at("feature_dim").get<int>();
    fit.rank = j.at("rank").get<int>();
    fit.num_parties = j.at("num_parties").get<int>();
    fit.per_party_n = j.at("per_party_n").get<long>();
    fit.param_bound = j.at("param_bound").get<double>();
    fit.U_hat = matrix_from_json(j.at("U_hat"));
    fit.alpha_hat = matrix_from_json(j.at("alpha_hat"));
    fit.theta_hat = matrix_from_json(j.at("theta_hat"));
    for (const auto& s : j.at("sigma")) fit.sigma.push_back(matrix_from_json(s));
    fit.gamma = j.at("gamma").get<double>();
    for (const auto& t : j.at("loss_trace"))
        fit.loss_trace.push_back({t.at(0).get<long>(), t.at(1).get<double>()});
    fit.converged = j.at("converged").get<bool>();
    fit.final_grad_norm = j.value("final_grad_norm", 0.0);
    return fit;
}

inline json to_json(const PolicySolution& sol, WelfareKind kind) {
    json j{{"schema", "policy-solution/v1"},
           {"welfare", to_string(kind)},
           {"policy", sol.policy},
           {"pessimistic_value", sol.pessimistic_value},
           {"solver_mode", sol.solver_mode},
           {"policies_evaluated", sol.policies_evaluated},
           {"starts_used", sol.starts_used},
           {"inner_residual", sol.inner_residual},
           {"inner_certified", sol.inner_certified}};
    if (sol.inner_thetas.size() > 0) j["inner_thetas"] = matrix_to_json(sol.inner_thetas);
    if (std::isfinite(sol.true_value)) j["true_value"] = sol.true_value;
    if (std::isfinite(sol.optimal_true_value)) {
        j["optimal_true_value"] = sol.optimal_true_value;
        j["suboptimality"] = sol.suboptimality;
        j["optimal_policy"] = sol.optimal_policy;
    }
    return j;
}

inline json to_json(const WinnerSolution& sol) {
    json p = json::array();
    json q = json::array();
    for (const auto& v : sol.p) p.push_back(vector_to_json(v));
    for (const auto& v : sol.q) q.push_back(vector_to_json(v));
    return json{{"schema", "vn-winner/v1"},
                {"p", p},
                {"q", q},
                {"values", vector_to_json(sol.values)},
                {"tol", sol.tol},
                {"max_certificate_gap", sol.max_certificate_gap}};
}

}  // namespace mpal
