#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpirl/domains.hpp"
#include "mpirl/mdp.hpp"

namespace mpirl {

enum class RewardClass { NoReward, UniqueUpToConstant, Underdetermined };

std::string to_string(RewardClass c);

struct RankReport {
    int rank_phi = 0;
    int rank_phi_b = 0;
    RewardClass classification = RewardClass::NoReward;
    Vec singular_values;  // of Phi
    std::optional<Vec> reward_solution;
    bool borderline = false;  // singular values within 10x of the rank cutoff
};

/// Builds the stacked linear system Phi x = b over x = (r, V_1, ..., V_K):
/// row (k, a, s) reads  T_a(s,.) r + gamma_k T_a(s,.) V_k - V_k(s)
///                      = lambda log pi_k(a|s).
/// Phi is K|A||S| x (K+1)|S|; callers clip policies with zero entries first.
std::pair<Mat, Vec> build_phi_b(const TabularMdp& mdp, const ExpertSet& experts,
                                const Vec& gammas);

/// Numerical ranks of Phi and [Phi|b] by SVD; a consistent system is solved
/// for its minimum-norm x, whose first |S| entries are the reward.
RankReport rank_classify(const Mat& phi, const Vec& b, double rank_tol = 1e-8);

struct GridScanEntry {
    Vec gammas;
    RankReport report;
};

/// Evaluates rank_classify on the lattice over [0,1]^K with the given step,
/// skipping points with any |gamma_i - gamma_j| < step/2. Uses the first K
/// experts of the set. Grid points are independent; `threads` bounds the
/// fan-out, and results keep deterministic lexicographic order regardless.
std::vector<GridScanEntry> grid_scan(const TabularMdp& mdp, const ExpertSet& experts,
                                     double grid_step, int k_count, int threads = 1);

std::string grid_scan_csv(const std::vector<GridScanEntry>& entries);

struct HeatmapCell {
    double gamma1 = 0.0, gamma2 = 0.0;
    double gen_error = 0.0;
};

/// K = 2 scan that recovers a reward at every consistent grid point and
/// scores it by generalization error over randomized environments.
std::vector<HeatmapCell> gen_error_heatmap(const DomainSpec& spec, const TabularMdp& mdp,
                                           const ExpertSet& experts_k2, double grid_step,
                                           int n_envs, uint64_t seed, int threads = 1);

std::string heatmap_csv(const std::vector<HeatmapCell>& cells);

}  // namespace mpirl
