#include "mpirl/mce_irl.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace mpirl {

namespace {

// The dual is parameterized by next-state ("successor") feature
// expectations sum_{s,a} mu(s,a) T(.|s,a) phi: with next-state rewards the
// soft value from rho0 satisfies rho0'V = theta'fhat + lambda H exactly, so
// the envelope gradient of the dual is the successor-feature mismatch.
// Matching successor features is equivalent to matching plain ones at the
// same gamma (fhat = (f - rho0-features)/gamma), so the primal is unchanged.
struct PolicyStats {
    StochasticPolicy policy;
    Vec value;
    Vec successor_features;
    Vec features;  // plain, current-state
    double entropy = 0.0;
};

Vec successor_features_of(const TabularMdp& mdp, const OccupancyMeasure& mu) {
    Vec next_marginal = Vec::Zero(mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a)
        next_marginal += mdp.transitions[a].transpose() * mu.mu_sa.col(a);
    return mdp.features.transpose() * next_marginal;
}

PolicyStats solve_policy(const TabularMdp& mdp, const Vec& reward, double gamma) {
    const TabularMdp shifted = mdp.with_reward(reward);
    auto [report, policy] = soft_value_iteration(shifted, gamma);
    PolicyStats stats;
    const OccupancyMeasure mu = occupancy_measure(shifted, policy, gamma);
    const Vec marginals = mu.state_marginals();
    stats.features = mdp.features.transpose() * marginals;
    stats.successor_features = successor_features_of(mdp, mu);
    double h = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (marginals[s] <= 0.0) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double m = mu.mu_sa(s, a);
            if (m > 0.0) h -= std::log(m / marginals[s]) * m;
        }
    }
    stats.entropy = h;
    stats.policy = std::move(policy);
    stats.value = std::move(report.v);
    return stats;
}

Vec reward_from_theta(const TabularMdp& mdp, const Vec& theta) { return mdp.features * theta; }

struct ExpertStats {
    std::vector<Vec> features;
    std::vector<Vec> successor_features;
    std::vector<double> entropies;
};

ExpertStats expert_statistics(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas) {
    ExpertStats stats;
    for (int k = 0; k < experts.size(); ++k) {
        const OccupancyMeasure mu = occupancy_measure(mdp, experts.policies[k], gammas[k]);
        const Vec marginals = mu.state_marginals();
        stats.features.push_back(mdp.features.transpose() * marginals);
        stats.successor_features.push_back(successor_features_of(mdp, mu));
        stats.entropies.push_back(causal_entropy(mdp, experts.policies[k], gammas[k]));
    }
    return stats;
}

}  // namespace

InnerOutcome solve_inner_dual(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                              const InnerSolveOptions& opts) {
    if (gammas.size() != experts.size())
        throw ValidationError("gamma vector length must match the expert count");
    const int K = experts.size();
    const int d = static_cast<int>(mdp.features.cols());
    const double lambda = mdp.temperature;
    const ExpertStats expert_stats = expert_statistics(mdp, experts, gammas);

    Vec theta = opts.warm_start.value_or(Vec::Zero(d));

    // Dual value and its exact gradient (successor-feature mismatch).
    auto evaluate = [&](const Vec& th, std::vector<PolicyStats>& stats_out, Vec* grad) {
        const Vec reward = reward_from_theta(mdp, th);
        stats_out.clear();
        if (grad) grad->setZero();
        double dual_value = 0.0;
        for (int k = 0; k < K; ++k) {
            stats_out.push_back(solve_policy(mdp, reward, gammas[k]));
            const Vec diff =
                stats_out.back().successor_features - expert_stats.successor_features[k];
            dual_value += lambda * stats_out.back().entropy + th.dot(diff);
            if (grad) *grad += diff;  // gradient of the (minimized) dual
        }
        return dual_value;
    };

    std::vector<PolicyStats> stats, trial_stats;
    Vec grad(d), trial_grad(d);
    double dual_value = evaluate(theta, stats, &grad);
    bool converged = grad.norm() < opts.grad_tol;
    int steps_taken = 0;
    double damping = 1e-6;

    // Damped Newton with a finite-difference Hessian: first-order steps
    // crawl on these badly conditioned duals, while d <= |S| keeps the
    // Hessian cheap. Each iteration counts its gradient evaluations against
    // max_grad_steps so the budget stays comparable across solvers.
    const double fd_step = 1e-6;
    while (!converged && steps_taken + 2 * d + 1 <= opts.max_grad_steps) {
        Mat hessian(d, d);
        std::vector<PolicyStats> scratch;
        for (int j = 0; j < d; ++j) {
            Vec up = theta, down = theta;
            up[j] += fd_step;
            down[j] -= fd_step;
            Vec grad_up(d), grad_down(d);
            evaluate(up, scratch, &grad_up);
            evaluate(down, scratch, &grad_down);
            hessian.col(j) = (grad_up - grad_down) / (2.0 * fd_step);
        }
        steps_taken += 2 * d;
        hessian = 0.5 * (hessian + hessian.transpose());

        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            const Vec step =
                (hessian + damping * Mat::Identity(d, d)).ldlt().solve(-grad);
            const Vec trial = theta + step;
            const double trial_value = evaluate(trial, trial_stats, &trial_grad);
            ++steps_taken;
            if (trial_value <= dual_value + 1e-12) {
                theta = trial;
                dual_value = trial_value;
                stats = std::move(trial_stats);
                grad = trial_grad;
                damping = std::max(damping * 0.3, 1e-12);
                accepted = true;
                break;
            }
            damping *= 10.0;
            if (steps_taken >= opts.max_grad_steps) break;
        }
        if (!accepted) break;
        if (grad.norm() < opts.grad_tol) converged = true;
    }

    InnerOutcome outcome;
    outcome.converged = converged;
    outcome.grad_steps = steps_taken;
    outcome.dual.theta = theta;
    outcome.dual.entropies = Vec(K);
    // Reported gap: Algorithm-2 form over plain feature expectations. The
    // per-expert excesses delta_k = lambda(H_k - H*_k) + theta'(fhat_k -
    // fhat*_k) are each nonnegative by single-expert weak duality and vanish
    // together exactly when some shared reward reproduces every expert, so
    // their sum is the feasibility signal that survives exact convergence.
    double gap_plain = 0.0;
    double excess = 0.0;
    double entropy_sum = 0.0;
    for (int k = 0; k < K; ++k) {
        gap_plain += theta.dot(stats[k].features - expert_stats.features[k]);
        excess += lambda * (stats[k].entropy - expert_stats.entropies[k]) +
                  theta.dot(stats[k].successor_features - expert_stats.successor_features[k]);
        outcome.dual.entropies[k] = stats[k].entropy;
        entropy_sum += stats[k].entropy;
        outcome.dual.policies.push_back(std::move(stats[k].policy));
        outcome.dual.values.push_back(std::move(stats[k].value));
    }
    outcome.dual.duality_gap = gap_plain;
    outcome.dual.excess = excess;
    outcome.feasible = std::abs(excess) <= opts.epsilon;
    outcome.score = outcome.feasible ? entropy_sum : -std::abs(excess);
    return outcome;
}

double duality_gap(const TabularMdp& mdp, const Vec& theta, const ExpertSet& experts,
                   const Vec& gammas) {
    const ExpertStats expert_stats = expert_statistics(mdp, experts, gammas);
    const Vec reward = reward_from_theta(mdp, theta);
    double gap = 0.0;
    for (int k = 0; k < experts.size(); ++k) {
        const PolicyStats stats = solve_policy(mdp, reward, gammas[k]);
        gap += theta.dot(stats.features - expert_stats.features[k]);
    }
    return gap;
}

MlObjectiveReport ml_objective(const TabularMdp& mdp, const Vec& theta, const Vec& gammas,
                               const ExpertSet& experts) {
    const int K = experts.size();
    const Vec reward = reward_from_theta(mdp, theta);

    auto contribution = [&](int k, double gamma) {
        const PolicyStats stats = solve_policy(mdp, reward, gamma);
        const StochasticPolicy pi_theta = clip_policy(stats.policy);
        const OccupancyMeasure mu = occupancy_measure(mdp, clip_policy(experts.policies[k]), gamma);
        double value = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double m = mu.mu_sa(s, a);
                if (m > 0.0) value += m * std::log(pi_theta.probs(s, a));
            }
        }
        return value;
    };

    MlObjectiveReport report;
    report.per_expert = Vec(K);
    report.grad_delta = Vec(K);
    for (int k = 0; k < K; ++k) {
        report.per_expert[k] = contribution(k, gammas[k]);
        report.value += report.per_expert[k];

        const double gamma = gammas[k];
        if (gamma > 1e-9 && gamma < 1.0 - 1e-9) {
            const double delta = std::log(gamma / (1.0 - gamma));
            const double h = 1e-5;
            const double up = 1.0 / (1.0 + std::exp(-(delta + h)));
            const double down = 1.0 / (1.0 + std::exp(-(delta - h)));
            report.grad_delta[k] = (contribution(k, up) - contribution(k, down)) / (2.0 * h);
        } else {
            report.grad_delta[k] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return report;
}

double dual_function_value(const TabularMdp& mdp, const Vec& theta, const Vec& gammas,
                           const ExpertSet& experts) {
    const ExpertStats expert_stats = expert_statistics(mdp, experts, gammas);
    const Vec reward = reward_from_theta(mdp, theta);
    const double lambda = mdp.temperature;
    double value = 0.0;
    for (int k = 0; k < experts.size(); ++k) {
        const PolicyStats stats = solve_policy(mdp, reward, gammas[k]);
        value += lambda * stats.entropy + theta.dot(stats.features - expert_stats.features[k]);
    }
    return value;
}

nlohmann::json dual_solution_to_json(const DualSolution& dual, const Vec& gammas) {
    nlohmann::json j;
    j["theta"] = std::vector<double>(dual.theta.data(), dual.theta.data() + dual.theta.size());
    j["gammas"] = std::vector<double>(gammas.data(), gammas.data() + gammas.size());
    j["duality_gap"] = dual.duality_gap;
    j["excess"] = dual.excess;
    j["entropies"] = std::vector<double>(dual.entropies.data(),
                                         dual.entropies.data() + dual.entropies.size());
    auto policies = nlohmann::json::array();
    for (const auto& policy : dual.policies) {
        auto rows = nlohmann::json::array();
        for (int s = 0; s < policy.probs.rows(); ++s) {
            auto row = nlohmann::json::array();
            for (int a = 0; a < policy.probs.cols(); ++a) row.push_back(policy.probs(s, a));
            rows.push_back(std::move(row));
        }
        policies.push_back(std::move(rows));
    }
    j["policies"] = std::move(policies);
    return j;
}

}  // namespace mpirl
