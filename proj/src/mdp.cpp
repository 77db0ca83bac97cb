#include "mpirl/mdp.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace mpirl {

namespace {

constexpr double kRowSumTol = 1e-12;

double logsumexp_scaled(const Eigen::Ref<const Vec>& q, double lambda) {
    const double qmax = q.maxCoeff();
    double acc = 0.0;
    for (int i = 0; i < q.size(); ++i) acc += std::exp((q[i] - qmax) / lambda);
    return qmax + lambda * std::log(acc);
}

}  // namespace

void TabularMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0) throw ValidationError("state/action counts must be positive");
    if (static_cast<int>(transitions.size()) != n_actions)
        throw ValidationError("transition tensor must have one matrix per action");
    for (int a = 0; a < n_actions; ++a) {
        const Mat& t = transitions[a];
        if (t.rows() != n_states || t.cols() != n_states)
            throw ValidationError("transition matrix for action " + std::to_string(a) +
                                  " has wrong shape");
        for (int s = 0; s < n_states; ++s) {
            if (t.row(s).minCoeff() < 0.0)
                throw ValidationError("negative transition probability at (action " +
                                      std::to_string(a) + ", state " + std::to_string(s) + ")");
            if (std::abs(t.row(s).sum() - 1.0) > kRowSumTol)
                throw ValidationError("non-stochastic transition row at (action " +
                                      std::to_string(a) + ", state " + std::to_string(s) + ")");
        }
    }
    if (reward.size() != n_states) throw ValidationError("reward vector length mismatch");
    if (rho0.size() != n_states) throw ValidationError("rho0 length mismatch");
    if (rho0.minCoeff() < 0.0 || std::abs(rho0.sum() - 1.0) > kRowSumTol)
        throw ValidationError("rho0 is not a probability distribution");
    if (features.rows() != n_states) throw ValidationError("feature matrix row count mismatch");
    if (temperature <= 0.0) throw ValidationError("temperature must be positive");
}

bool TabularMdp::is_absorbing(int s) const {
    for (int a = 0; a < n_actions; ++a) {
        if (std::abs(transitions[a](s, s) - 1.0) > 1e-12) return false;
    }
    return true;
}

std::vector<char> TabularMdp::absorbing_mask() const {
    std::vector<char> mask(n_states);
    for (int s = 0; s < n_states; ++s) mask[s] = is_absorbing(s) ? 1 : 0;
    return mask;
}

TabularMdp TabularMdp::with_reward(const Vec& r) const {
    TabularMdp copy = *this;
    copy.reward = r;
    return copy;
}

TabularMdp make_mdp(int n_states, int n_actions, std::vector<Mat> transitions, Vec reward, Vec rho0,
                    double temperature) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transitions = std::move(transitions);
    mdp.reward = std::move(reward);
    mdp.rho0 = std::move(rho0);
    mdp.features = Mat::Identity(n_states, n_states);
    mdp.temperature = temperature;
    mdp.validate();
    return mdp;
}

int StochasticPolicy::argmax_row(int s) const {
    int best = 0;
    for (int a = 1; a < probs.cols(); ++a) {
        if (probs(s, a) > probs(s, best)) best = a;
    }
    return best;
}

StochasticPolicy to_stochastic(const DeterministicPolicy& policy, int n_actions) {
    Mat probs = Mat::Zero(static_cast<int>(policy.action_of.size()), n_actions);
    for (size_t s = 0; s < policy.action_of.size(); ++s) probs(static_cast<int>(s), policy.action_of[s]) = 1.0;
    return {probs};
}

DeterministicPolicy to_deterministic(const StochasticPolicy& policy) {
    DeterministicPolicy out;
    out.action_of.resize(policy.probs.rows());
    for (int s = 0; s < policy.probs.rows(); ++s) {
        int a = policy.argmax_row(s);
        if (std::abs(policy.probs(s, a) - 1.0) > 1e-9)
            throw ValidationError("policy row " + std::to_string(s) + " is not one-hot");
        out.action_of[s] = a;
    }
    return out;
}

StochasticPolicy clip_policy(const StochasticPolicy& policy, double eps) {
    Mat probs = policy.probs.cwiseMax(eps);
    for (int s = 0; s < probs.rows(); ++s) probs.row(s) /= probs.row(s).sum();
    return {probs};
}

std::pair<ValueReport, DeterministicPolicy> value_iteration(const TabularMdp& mdp, double gamma,
                                                            const SolveOptions& opts) {
    gamma = cap_gamma(gamma);
    const auto mask = mdp.absorbing_mask();
    const int S = mdp.n_states, A = mdp.n_actions;

    Vec v = Vec::Zero(S);
    Mat q = Mat::Zero(S, A);
    double residual = 0.0;
    bool converged = false;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = 0.0;
            if (!mask[s]) {
                for (int a = 0; a < A; ++a) {
                    q(s, a) = mdp.transitions[a].row(s).dot(mdp.reward + gamma * v);
                    if (a == 0 || q(s, a) > best) best = q(s, a);
                }
            } else {
                q.row(s).setZero();
            }
            residual = std::max(residual, std::abs(best - v[s]));
            v[s] = best;
        }
        if (residual < opts.tol * (1.0 + v.lpNorm<Eigen::Infinity>())) {
            converged = true;
            break;
        }
    }
    if (!converged) throw ConvergenceError("value iteration did not converge", residual);

    DeterministicPolicy greedy;
    greedy.action_of.resize(S, 0);
    for (int s = 0; s < S; ++s) {
        int best = 0;
        for (int a = 1; a < A; ++a) {
            if (q(s, a) > q(s, best)) best = a;
        }
        greedy.action_of[s] = best;
    }
    return {ValueReport{std::move(v), std::move(q), gamma, false}, std::move(greedy)};
}

std::pair<ValueReport, StochasticPolicy> soft_value_iteration(const TabularMdp& mdp, double gamma,
                                                              const SolveOptions& opts) {
    gamma = cap_gamma(gamma);
    const int S = mdp.n_states, A = mdp.n_actions;
    const double lambda = mdp.temperature;

    Mat pi = Mat::Constant(S, A, 1.0 / A);
    Vec v = Vec::Zero(S);
    Mat q(S, A);
    double residual = 0.0;
    bool converged = false;
    // Soft policy iteration: evaluate the current Boltzmann policy exactly,
    // then re-derive the policy from its Q-values.
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Mat t_pi = Mat::Zero(S, S);
        Vec entropy_bonus(S);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) t_pi.row(s) += pi(s, a) * mdp.transitions[a].row(s);
            double h = 0.0;
            for (int a = 0; a < A; ++a) {
                if (pi(s, a) > 0.0) h -= pi(s, a) * std::log(pi(s, a));
            }
            entropy_bonus[s] = lambda * h;
        }
        Mat system = Mat::Identity(S, S) - gamma * t_pi;
        Vec v_new = system.partialPivLu().solve(t_pi * mdp.reward + entropy_bonus);

        for (int a = 0; a < A; ++a) q.col(a) = mdp.transitions[a] * (mdp.reward + gamma * v_new);
        for (int s = 0; s < S; ++s) {
            const double vs = logsumexp_scaled(q.row(s), lambda);
            for (int a = 0; a < A; ++a) pi(s, a) = std::exp((q(s, a) - vs) / lambda);
            pi.row(s) /= pi.row(s).sum();
        }
        residual = (v_new - v).lpNorm<Eigen::Infinity>();
        v = v_new;
        // Relative criterion: near gamma = 1 the values grow like
        // 1/(1-gamma) and an absolute 1e-12 target is below double
        // resolution.
        if (residual < opts.tol * (1.0 + v.lpNorm<Eigen::Infinity>())) {
            converged = true;
            break;
        }
    }
    if (!converged) throw ConvergenceError("soft value iteration did not converge", residual);

    // Report v as the exact log-sum-exp of q so the soft Bellman identity
    // holds to machine precision.
    for (int a = 0; a < A; ++a) q.col(a) = mdp.transitions[a] * (mdp.reward + gamma * v);
    for (int s = 0; s < S; ++s) {
        v[s] = logsumexp_scaled(q.row(s), lambda);
        for (int a = 0; a < A; ++a) pi(s, a) = std::exp((q(s, a) - v[s]) / lambda);
        pi.row(s) /= pi.row(s).sum();
    }
    return {ValueReport{std::move(v), std::move(q), gamma, true}, StochasticPolicy{std::move(pi)}};
}

Mat policy_transition(const TabularMdp& mdp, const StochasticPolicy& policy) {
    Mat t_pi = Mat::Zero(mdp.n_states, mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            t_pi.row(s) += policy.probs(s, a) * mdp.transitions[a].row(s);
        }
    }
    return t_pi;
}

OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const StochasticPolicy& policy,
                                   double gamma) {
    gamma = cap_gamma(gamma);
    const Mat t_pi = policy_transition(mdp, policy);
    Mat system = Mat::Identity(mdp.n_states, mdp.n_states) - gamma * t_pi.transpose();
    Eigen::PartialPivLU<Mat> lu(system);
    if (std::abs(lu.determinant()) < 1e-300)
        throw std::runtime_error("occupancy flow system is singular");
    Vec d = lu.solve(mdp.rho0);

    Mat mu(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) mu.row(s) = d[s] * policy.probs.row(s);
    return {std::move(mu), gamma};
}

Vec feature_expectation(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma) {
    const OccupancyMeasure mu = occupancy_measure(mdp, policy, gamma);
    return mdp.features.transpose() * mu.state_marginals();
}

double causal_entropy(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma) {
    const OccupancyMeasure mu = occupancy_measure(mdp, policy, gamma);
    const Vec marginals = mu.state_marginals();
    double h = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (marginals[s] <= 0.0) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double m = mu.mu_sa(s, a);
            if (m > 0.0) h -= std::log(m / marginals[s]) * m;
        }
    }
    return h;
}

Vec policy_value(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma,
                 const std::optional<Vec>& reward_override) {
    gamma = cap_gamma(gamma);
    const Vec& r = reward_override ? *reward_override : mdp.reward;
    const auto mask = mdp.absorbing_mask();
    Mat t_pi = policy_transition(mdp, policy);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mask[s]) t_pi.row(s).setZero();  // episode ends: no reward, no continuation
    }
    Mat system = Mat::Identity(mdp.n_states, mdp.n_states) - gamma * t_pi;
    return system.partialPivLu().solve(t_pi * r);
}

Vec policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy, double gamma,
                 const std::optional<Vec>& reward_override) {
    return policy_value(mdp, to_stochastic(policy, mdp.n_actions), gamma, reward_override);
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    auto tensor = nlohmann::json::array();
    for (const Mat& t : mdp.transitions) {
        auto rows = nlohmann::json::array();
        for (int s = 0; s < t.rows(); ++s) {
            auto row = nlohmann::json::array();
            for (int sp = 0; sp < t.cols(); ++sp) row.push_back(t(s, sp));
            rows.push_back(std::move(row));
        }
        tensor.push_back(std::move(rows));
    }
    j["transitions"] = std::move(tensor);
    j["reward"] = std::vector<double>(mdp.reward.data(), mdp.reward.data() + mdp.reward.size());
    j["rho0"] = std::vector<double>(mdp.rho0.data(), mdp.rho0.data() + mdp.rho0.size());
    bool identity = mdp.features.rows() == mdp.features.cols() &&
                    mdp.features.isApprox(Mat::Identity(mdp.n_states, mdp.n_states));
    if (!identity) {
        auto rows = nlohmann::json::array();
        for (int s = 0; s < mdp.features.rows(); ++s) {
            auto row = nlohmann::json::array();
            for (int dd = 0; dd < mdp.features.cols(); ++dd) row.push_back(mdp.features(s, dd));
            rows.push_back(std::move(row));
        }
        j["features"] = std::move(rows);
    }
    j["temperature"] = mdp.temperature;
    return j;
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    const auto& tensor = j.at("transitions");
    if (static_cast<int>(tensor.size()) != mdp.n_actions)
        throw ValidationError("transitions tensor has wrong action count");
    for (const auto& rows : tensor) {
        Mat t(mdp.n_states, mdp.n_states);
        if (static_cast<int>(rows.size()) != mdp.n_states)
            throw ValidationError("transitions tensor has wrong state count");
        for (int s = 0; s < mdp.n_states; ++s) {
            const auto& row = rows[s];
            if (static_cast<int>(row.size()) != mdp.n_states)
                throw ValidationError("transitions tensor has wrong next-state count");
            for (int sp = 0; sp < mdp.n_states; ++sp) t(s, sp) = row[sp].get<double>();
        }
        mdp.transitions.push_back(std::move(t));
    }
    auto read_vec = [&](const char* key) {
        const auto& arr = j.at(key);
        Vec v(static_cast<int>(arr.size()));
        for (int i = 0; i < v.size(); ++i) v[i] = arr[i].get<double>();
        return v;
    };
    mdp.reward = read_vec("reward");
    mdp.rho0 = read_vec("rho0");
    if (j.contains("features")) {
        const auto& rows = j.at("features");
        const int d = static_cast<int>(rows.at(0).size());
        mdp.features = Mat(static_cast<int>(rows.size()), d);
        for (int s = 0; s < mdp.features.rows(); ++s)
            for (int dd = 0; dd < d; ++dd) mdp.features(s, dd) = rows[s][dd].get<double>();
    } else {
        mdp.features = Mat::Identity(mdp.n_states, mdp.n_states);
    }
    mdp.temperature = j.value("temperature", 1.0);
    mdp.validate();
    return mdp;
}

}  // namespace mpirl
