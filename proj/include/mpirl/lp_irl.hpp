#pragma once

#include <tuple>
#include <vector>

#include "mpirl/domains.hpp"
#include "mpirl/lp.hpp"
#include "mpirl/mdp.hpp"

#include <json.hpp>

namespace mpirl {

/// Linear map from reward vectors to expert Q-gaps. Row (k, s, a) with
/// a != pi_k(s) carries
///   w = (T(.|s,pi_k(s)) - T(.|s,a)) (I - gamma_k T^{pi_k})^{-1},
/// so that w . r = Q(s, pi_k(s)) - Q(s, a) under reward r. Rows at absorbing
/// states are identically zero. The resolvent masks absorbing rows of T^pi,
/// matching value_iteration's episode-end semantics.
struct QGapOperator {
    struct RowIndex {
        int k, s, a;
    };
    std::vector<RowIndex> index;
    Mat w;  // rows x n_states

    int rows() const { return static_cast<int>(index.size()); }
    Vec apply(const Vec& reward) const { return w * reward; }
    int find_row(int k, int s, int a) const;
};

QGapOperator build_qgap_operator(const TabularMdp& mdp, const ExpertSet& experts,
                                 const Vec& gammas);

/// Sparsity penalty weight. Sits inside the window where the toy's learned
/// reward keeps the published structure (r(s2) > r(s1)): the max achievable
/// min-gap per unit of ||r||_1 is ~0.027-0.048 across the relevant discount
/// region, so 0.1 would zero the solution and 0.01 flips to a denser branch.
inline constexpr double kDefaultL1Penalty = 0.03;

/// Per-expert sets of state-action pairs on which the expert action is
/// strictly separable by some reward, plus the pairwise feasibility flag
/// (every ordered expert pair must be separated at some state).
struct OmegaReport {
    std::vector<std::vector<std::pair<int, int>>> omega_k;
    Vec slack;  // optimal z in QGapOperator row order
    bool feasible = false;
};

struct IrlSolution {
    Vec reward;
    Vec gammas;
    double objective = 0.0;
    std::vector<std::tuple<int, int, int>> omega;  // (k, s, a)
    std::string status = "optimal";
    double l1_penalty = 0.0;
    double r_max = 0.0;
};

nlohmann::json irl_solution_to_json(const IrlSolution& solution);

/// Single-expert reward recovery: maximize the sum over states of the
/// minimal Q-gap, minus an l1 penalty, subject to the expert being weakly
/// optimal and |r| <= r_max.
IrlSolution lp_irl_single(const TabularMdp& mdp, const DeterministicPolicy& expert, double gamma,
                          double l1_penalty, double r_max);

/// Multi-expert extension that just sums per-state minimal gaps across
/// experts. Kept as a runnable failure demonstration: together with the
/// outer search it collapses onto duplicated discount factors.
IrlSolution naive_mplp(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                       double l1_penalty, double r_max);

/// Solves min sum 1'z  s.t.  gap + z >= 1, gap >= 0, z >= 0, |r| <= r_max
/// and reads off Omega_k = {(s,a): z*(s,a) <= z_tol}. The feasible flag asks
/// that every ordered expert pair (i, j) is separated at some state:
/// (s, pi_j(s)) in Omega_i with pi_i(s) != pi_j(s).
OmegaReport compute_omega(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                          double r_max = 10.0, double z_tol = 1e-6);

/// Inner problem at fixed Gamma: maximize t - l1_penalty*||r||_1 subject to
/// gap(k,s,a) >= t on Omega_k, all gaps >= 0, |r| <= r_max. Throws
/// InfeasibleGamma when the omega report is infeasible.
IrlSolution mplp_inner(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                       const OmegaReport& omega, double l1_penalty, double r_max);

}  // namespace mpirl
