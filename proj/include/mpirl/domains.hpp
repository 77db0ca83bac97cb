#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpirl/mdp.hpp"

namespace mpirl {

enum class DomainKind { Toy, BigSmall, Cliff };

struct DomainSpec {
    DomainKind kind = DomainKind::Toy;
    int grid_rows = 5;  // grid domains only
    int grid_cols = 5;
    uint64_t seed = 0;
};

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

enum class ExpertRegime { Standard, EntropyRegularized };

/// K expert policies sharing one reward function, each solved at its own
/// discount factor. Hard experts are stored one-hot.
struct ExpertSet {
    std::vector<StochasticPolicy> policies;
    std::optional<Vec> true_gammas;
    ExpertRegime regime = ExpertRegime::Standard;

    int size() const { return static_cast<int>(policies.size()); }
    DeterministicPolicy deterministic(int k) const { return to_deterministic(policies[k]); }
};

/// Four-state chain where the agent trades off success probability against
/// reward magnitude: a0 reaches the +10 absorbing state w.p. 0.95, a1 the +6
/// state w.p. 0.9, a2 the +7 state w.p. 0.6, staying put otherwise.
TabularMdp build_toy();

/// Deterministic gridworld with a +2 absorbing cell at the bottom-left, a +20
/// absorbing cell at the bottom-right, and -2 per step elsewhere. Actions are
/// {right, down, left, up}; walls keep the agent in place.
TabularMdp build_big_small(int rows, int cols);

/// Slippery gridworld whose top row is an absorbing cliff (-10) except for
/// the +20 goal in the top-right corner. Steps cost -2 in the row adjacent to
/// the cliff and -1 elsewhere. Intended moves succeed w.p. 0.9; otherwise the
/// agent moves in one of the other three directions (0.1/3 each).
TabularMdp build_cliff(int rows, int cols);

TabularMdp build_domain(const DomainSpec& spec);

/// Default true discount factors per domain. Standard experts use the
/// midpoints of the per-policy optimality intervals; entropy-regularized
/// experts use the reference values the policies were generated from.
Vec default_gammas(DomainKind kind, ExpertRegime regime);

double default_r_max(DomainKind kind);

/// Solves one expert per discount factor and screens the set: any two
/// policies identical everywhere raise AssumptionViolation.
ExpertSet make_experts(const TabularMdp& mdp, const Vec& gammas, ExpertRegime regime);

/// Random transfer environment: the toy resamples the per-action
/// success probabilities out of s0; grids redraw the intended-direction
/// probability eps ~ Unif(0,1) with the remainder split over the other three
/// directions. Also draws gamma ~ Unif(0, 0.999). Deterministic per seed.
std::pair<TabularMdp, double> randomize_environment(const DomainSpec& spec, const TabularMdp& base,
                                                    uint64_t rng_seed);

nlohmann::json expert_set_to_json(const ExpertSet& experts);
ExpertSet expert_set_from_json(const nlohmann::json& j);

}  // namespace mpirl
