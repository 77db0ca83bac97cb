#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpirl/domains.hpp"
#include "mpirl/mdp.hpp"

#include <json.hpp>

namespace mpirl {

struct GenEvalConfig {
    int n_envs = 100;
    uint64_t seed = 0;
    DomainSpec domain;
    Vec learned_reward;
    Vec true_reward;
};

struct GenEvalReport {
    Vec per_env;  // normalized regrets, one per environment
    double mean = 0.0;
    double sd = 0.0;  // population standard deviation
    std::vector<uint64_t> seeds;
    int resampled = 0;  // environments skipped because V_pi* was ~ 0
};

/// For each seeded random environment (T, gamma): solve the optimal policy
/// under the true reward and under the learned reward, then score
///   (V_pi* - V_pi_hat) / V_pi*
/// with both values taken under the true reward, rho0-weighted. Environments
/// whose optimal value is within 1e-9 of zero are resampled with follow-up
/// seeds and counted in `resampled`.
GenEvalReport generalization_error(const GenEvalConfig& config, const TabularMdp& base);

/// True when sorting the learned gammas applies the same permutation as
/// sorting the reference gammas (interval truths enter as midpoints).
bool order_recovery(const Vec& learned_gammas, const Vec& true_gammas);

struct ValueCurvePoint {
    double gamma = 0.0;
    int policy_index = 0;
    double value = 0.0;
};

/// rho0-weighted value of each policy under the given reward, for every
/// gamma on the grid. The data behind value-vs-discount plots.
std::vector<ValueCurvePoint> value_curves(const TabularMdp& mdp, const Vec& reward,
                                          const std::vector<StochasticPolicy>& policies,
                                          const std::vector<double>& gamma_grid);

std::string value_curves_csv(const std::vector<ValueCurvePoint>& points);

nlohmann::json gen_eval_report_to_json(const GenEvalReport& report);

}  // namespace mpirl
