#include "mpirl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace mpirl {

GenEvalReport generalization_error(const GenEvalConfig& config, const TabularMdp& base) {
    if (config.n_envs < 1) throw ValidationError("n_envs must be at least 1");
    if (config.learned_reward.size() != config.true_reward.size())
        throw ValidationError("learned and true rewards must have the same length");

    GenEvalReport report;
    report.per_env = Vec(config.n_envs);
    report.seeds.reserve(config.n_envs);

    uint64_t overflow_seed = config.seed + static_cast<uint64_t>(config.n_envs);
    for (int n = 0; n < config.n_envs; ++n) {
        uint64_t env_seed = config.seed + static_cast<uint64_t>(n);
        double regret = 0.0;
        while (true) {
            auto [env, gamma] = randomize_environment(config.domain, base, env_seed);
            const TabularMdp true_env = env.with_reward(config.true_reward);
            auto [v_star_report, pi_star] = value_iteration(true_env, gamma);
            auto [v_hat_report, pi_hat] =
                value_iteration(env.with_reward(config.learned_reward), gamma);
            const double v_star = true_env.rho0.dot(policy_value(true_env, pi_star, gamma));
            if (std::abs(v_star) < 1e-9) {
                env_seed = overflow_seed++;
                ++report.resampled;
                continue;
            }
            const double v_hat = true_env.rho0.dot(policy_value(true_env, pi_hat, gamma));
            regret = (v_star - v_hat) / v_star;
            break;
        }
        report.per_env[n] = regret;
        report.seeds.push_back(env_seed);
    }
    report.mean = report.per_env.mean();
    report.sd = std::sqrt((report.per_env.array() - report.mean).square().mean());
    return report;
}

bool order_recovery(const Vec& learned_gammas, const Vec& true_gammas) {
    if (learned_gammas.size() != true_gammas.size())
        throw ValidationError("gamma vectors must have equal length");
    const int n = static_cast<int>(learned_gammas.size());
    auto sorting_permutation = [n](const Vec& v) {
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::stable_sort(perm.begin(), perm.end(), [&](int i, int j) { return v[i] < v[j]; });
        return perm;
    };
    return sorting_permutation(learned_gammas) == sorting_permutation(true_gammas);
}

std::vector<ValueCurvePoint> value_curves(const TabularMdp& mdp, const Vec& reward,
                                          const std::vector<StochasticPolicy>& policies,
                                          const std::vector<double>& gamma_grid) {
    std::vector<ValueCurvePoint> points;
    points.reserve(gamma_grid.size() * policies.size());
    for (double gamma : gamma_grid) {
        for (size_t p = 0; p < policies.size(); ++p) {
            const Vec v = policy_value(mdp, policies[p], gamma, reward);
            points.push_back({gamma, static_cast<int>(p), mdp.rho0.dot(v)});
        }
    }
    return points;
}

std::string value_curves_csv(const std::vector<ValueCurvePoint>& points) {
    auto fmt = [](double value) {
        char buffer[40];
        std::snprintf(buffer, sizeof(buffer), "%.17g", value);
        return std::string(buffer);
    };
    std::string csv = "gamma,policy_index,value\n";
    for (const auto& point : points) {
        csv += fmt(point.gamma) + "," + std::to_string(point.policy_index) + "," +
               fmt(point.value) + "\n";
    }
    return csv;
}

nlohmann::json gen_eval_report_to_json(const GenEvalReport& report) {
    nlohmann::json j;
    j["mean"] = report.mean;
    j["sd"] = report.sd;
    j["per_env"] = std::vector<double>(report.per_env.data(),
                                       report.per_env.data() + report.per_env.size());
    j["seeds"] = report.seeds;
    j["resampled"] = report.resampled;
    return j;
}

}  // namespace mpirl
