#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpirl/bayesopt.hpp"
#include "mpirl/domains.hpp"
#include "mpirl/lp_irl.hpp"
#include "mpirl/mce_irl.hpp"

#include <json.hpp>

namespace mpirl {

enum class Algorithm { MplpIrl, MpmceIrl, NaiveLp, IdScan, GenEval, ValueCurves, Experts };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::Experts;
    DomainSpec domain;
    std::optional<Vec> gammas;  // expert discount factors; defaults per domain
    std::optional<ExpertRegime> regime;
    double l1_penalty = kDefaultL1Penalty;
    std::optional<double> r_max;  // defaults per domain
    double epsilon = 1e-6;
    double temperature = 1.0;
    OuterOptions bo;
    double grid_step = 0.05;
    double curve_step = 0.01;
    int n_envs = 100;
    int k_experts = 2;  // id_scan only
    bool heatmap = false;
    std::optional<Vec> learned_reward;  // gen_eval / value_curves input
    uint64_t seed = 0;
    std::string output_dir = ".";
    int threads = 1;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// All violations, not first-failure; empty means runnable.
std::vector<std::string> validate(const nlohmann::json& j);

/// Inner objective g*(Gamma) for MPLP-IRL: omega feasibility screen, then
/// the epigraph LP. Throws InfeasibleGamma on infeasible points so the outer
/// loop records its failure floor.
Objective mplp_objective(const TabularMdp& mdp, const ExpertSet& experts, double l1_penalty,
                         double r_max);

/// Naive multi-expert objective (no feasibility screen).
Objective naive_objective(const TabularMdp& mdp, const ExpertSet& experts, double l1_penalty,
                          double r_max);

/// Algorithm-2 score: entropy sum when the duality gap clears epsilon, else
/// -|gap|. Warm-starts each solve from the nearest previously queried Gamma.
Objective mpmce_objective(const TabularMdp& mdp, const ExpertSet& experts,
                          const InnerSolveOptions& opts);

/// Shift theta to zero mean, then report a reward whose largest
/// absorbing-state entry equals r_max (display parity with the true scale).
Vec display_reward(const TabularMdp& mdp, const Vec& theta, double r_max);

/// Runs the configured experiment and writes artifacts (JSON/CSV) into
/// config.output_dir. Returns the process exit status: 0 on success, 3 on
/// runtime failure (an error record is still written).
int run(const ExperimentConfig& config);

}  // namespace mpirl
