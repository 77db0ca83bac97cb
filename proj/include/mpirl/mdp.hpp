#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpirl/common.hpp"

#include <json.hpp>

namespace mpirl {

/// Finite MDP with next-state rewards: a transition s -a-> s' pays reward(s').
///
/// States whose every action self-loops with probability 1 are treated as
/// absorbing by the *standard* (hard) solvers: the terminal reward is paid on
/// first entry and the value of the absorbing state itself is 0, so episodes
/// effectively end there. Entropy-regularized solvers use the plain Bellman
/// equations throughout; see soft_value_iteration.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Mat> transitions;  // [action](state, next_state)
    Vec reward;                    // indexed by next state
    Vec rho0;                      // initial state distribution
    Mat features;                  // n_states x d, defaults to identity
    double temperature = 1.0;      // entropy temperature lambda

    /// Checks stochasticity of all rows, rho0, and temperature > 0.
    /// Throws ValidationError naming the offending (action, state) row.
    void validate() const;

    bool is_absorbing(int s) const;
    std::vector<char> absorbing_mask() const;

    /// Same dynamics with a different reward vector.
    TabularMdp with_reward(const Vec& r) const;
};

TabularMdp make_mdp(int n_states, int n_actions, std::vector<Mat> transitions, Vec reward,
                    Vec rho0, double temperature = 1.0);

struct DeterministicPolicy {
    std::vector<int> action_of;  // one action index per state
};

struct StochasticPolicy {
    Mat probs;  // n_states x n_actions, rows sum to 1

    int argmax_row(int s) const;
};

StochasticPolicy to_stochastic(const DeterministicPolicy& policy, int n_actions);

/// Converts one-hot rows back to action indices; throws if a row is not
/// one-hot within 1e-9.
DeterministicPolicy to_deterministic(const StochasticPolicy& policy);

/// Clamps probabilities below eps up to eps and renormalizes each row.
/// Deterministic policies pass through entropy/likelihood code this way.
StochasticPolicy clip_policy(const StochasticPolicy& policy, double eps = 1e-12);

struct ValueReport {
    Vec v;
    Mat q;  // n_states x n_actions
    double gamma = 0.0;
    bool soft = false;
};

struct OccupancyMeasure {
    Mat mu_sa;  // n_states x n_actions discounted visitation counts
    double gamma = 0.0;

    Vec state_marginals() const { return mu_sa.rowwise().sum(); }
    double total_mass() const { return mu_sa.sum(); }
};

struct SolveOptions {
    int max_iters = 100000;
    double tol = 1e-12;
};

/// Hard value iteration. Q(s,a) = sum_s' T(s'|s,a) (r(s') + gamma V(s'))
/// on non-absorbing states, Q = 0 on absorbing ones. Greedy ties break to
/// the lowest action index.
std::pair<ValueReport, DeterministicPolicy> value_iteration(const TabularMdp& mdp, double gamma,
                                                            const SolveOptions& opts = {});

/// Entropy-regularized solve of the plain soft Bellman equations
///   V(s) = lambda log sum_a exp(Q(s,a)/lambda),
///   pi(a|s) = exp((Q(s,a) - V(s))/lambda).
/// Implemented as soft policy iteration (policy evaluation by linear solve,
/// then Boltzmann improvement), which converges far faster than plain
/// backups when gamma is close to 1.
std::pair<ValueReport, StochasticPolicy> soft_value_iteration(const TabularMdp& mdp, double gamma,
                                                              const SolveOptions& opts = {});

/// Discounted state-action visitation counts, from the exact linear flow
/// system (I - gamma P^T) d = rho0 with mu(s,a) = d(s) pi(a|s).
OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const StochasticPolicy& policy,
                                   double gamma);

/// f = sum_s mu(s) phi^s; with identity features this is the discounted
/// state-visitation vector.
Vec feature_expectation(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma);

/// Discounted causal entropy sum_{s,a} -log(mu(s,a)/mu(s)) mu(s,a), with
/// 0 log 0 = 0.
double causal_entropy(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma);

/// Exact policy evaluation under the hard (absorbing-aware) semantics:
/// V(absorbing) = 0, V = T^pi (r + gamma V) elsewhere.
Vec policy_value(const TabularMdp& mdp, const StochasticPolicy& policy, double gamma,
                 const std::optional<Vec>& reward_override = std::nullopt);
Vec policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy, double gamma,
                 const std::optional<Vec>& reward_override = std::nullopt);

/// Row-stochastic state-to-state matrix T^pi(s, s') = sum_a pi(a|s) T(s'|s,a).
Mat policy_transition(const TabularMdp& mdp, const StochasticPolicy& policy);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);

}  // namespace mpirl
