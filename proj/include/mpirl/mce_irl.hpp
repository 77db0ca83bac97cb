#pragma once

#include <optional>
#include <vector>

#include "mpirl/domains.hpp"
#include "mpirl/mdp.hpp"

#include <json.hpp>

namespace mpirl {

/// Converged state of the Lagrangian dual solve: shared reward parameters,
/// the soft-optimal policy and value per expert (the value vector is the
/// negated flow multiplier), the duality gap
///   l = sum_k theta' (f_{pi_theta_k} - f_{pi*_k}),
/// and each recovered policy's causal entropy.
struct DualSolution {
    Vec theta;
    std::vector<StochasticPolicy> policies;
    std::vector<Vec> values;
    double duality_gap = 0.0;
    /// Dual value minus the expert entropy sum: a sum of per-expert
    /// nonnegative duality gaps that is zero exactly when some shared reward
    /// reproduces every expert. This is the feasibility scalar; the plain
    /// duality_gap above cancels to zero at any stationary point of the
    /// shared-parameter dual and cannot separate feasible from infeasible.
    double excess = 0.0;
    Vec entropies;
};

struct InnerOutcome {
    double score = 0.0;     // sum of entropies when feasible, else -|excess|
    bool feasible = false;  // |dual.excess| <= epsilon
    bool converged = false; // gradient norm target reached
    int grad_steps = 0;     // gradient evaluations spent
    DualSolution dual;
};

struct MlObjectiveReport {
    double value = 0.0;
    Vec per_expert;
    Vec grad_delta;  // d L / d logit(gamma_k), central finite differences
};

struct InnerSolveOptions {
    /// Feasibility threshold on the converged dual excess. Small because the
    /// toy's inner problem is numerically near-feasible off the truth: the
    /// excess is ~6e-11 at the true gammas and ~3e-6 one tenth away.
    double epsilon = 1e-6;
    int max_grad_steps = 5000;
    double step = 0.1;
    double grad_tol = 1e-6;
    std::optional<Vec> warm_start;
};

/// Minimizes the Lagrangian dual of the entropy-matching problem over the
/// shared reward parameters. Feature matching is posed over successor
/// (next-state) feature expectations, the parameterization under which
/// next-state-reward soft value iteration is the exact inner oracle and the
/// gradient is the per-expert feature mismatch summed. Solved by damped
/// Newton with a finite-difference Hessian; every gradient evaluation
/// counts against max_grad_steps. Feasibility is judged by the converged
/// dual excess (see DualSolution).
InnerOutcome solve_inner_dual(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                              const InnerSolveOptions& opts = {});

/// Duality gap at the given reward parameters.
double duality_gap(const TabularMdp& mdp, const Vec& theta, const ExpertSet& experts,
                   const Vec& gammas);

/// Discounted likelihood of the expert occupancied under the theta-policies:
///   L(theta, Gamma) = sum_k sum_{s,a} mu*_k(s,a) log pi_theta_k(a|s).
MlObjectiveReport ml_objective(const TabularMdp& mdp, const Vec& theta, const Vec& gammas,
                               const ExpertSet& experts);

/// Lagrangian dual function value
///   f(theta, Gamma) = sum_k [ lambda H_{pi_theta_k} + theta'(f_{pi_theta_k} - f_{pi*_k}) ].
double dual_function_value(const TabularMdp& mdp, const Vec& theta, const Vec& gammas,
                           const ExpertSet& experts);

nlohmann::json dual_solution_to_json(const DualSolution& dual, const Vec& gammas);

}  // namespace mpirl
