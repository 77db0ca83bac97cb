#include "mpirl/lp_irl.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace mpirl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<DeterministicPolicy> hard_experts(const ExpertSet& experts) {
    std::vector<DeterministicPolicy> out;
    out.reserve(experts.size());
    for (int k = 0; k < experts.size(); ++k) out.push_back(experts.deterministic(k));
    return out;
}

}  // namespace

int QGapOperator::find_row(int k, int s, int a) const {
    for (int i = 0; i < rows(); ++i) {
        if (index[i].k == k && index[i].s == s && index[i].a == a) return i;
    }
    return -1;
}

QGapOperator build_qgap_operator(const TabularMdp& mdp, const ExpertSet& experts,
                                 const Vec& gammas) {
    if (gammas.size() != experts.size())
        throw ValidationError("gamma vector length must match the expert count");
    const int S = mdp.n_states, A = mdp.n_actions;
    const auto mask = mdp.absorbing_mask();
    const auto policies = hard_experts(experts);

    QGapOperator op;
    op.w = Mat::Zero(static_cast<int>(experts.size()) * S * (A - 1), S);
    int row = 0;
    for (int k = 0; k < experts.size(); ++k) {
        const double gamma = cap_gamma(gammas[k]);
        Mat t_pi = Mat::Zero(S, S);
        for (int s = 0; s < S; ++s) {
            if (!mask[s]) t_pi.row(s) = mdp.transitions[policies[k].action_of[s]].row(s);
        }
        const Mat resolvent = (Mat::Identity(S, S) - gamma * t_pi).partialPivLu().inverse();
        for (int s = 0; s < S; ++s) {
            const int expert_action = policies[k].action_of[s];
            for (int a = 0; a < A; ++a) {
                if (a == expert_action) continue;
                op.index.push_back({k, s, a});
                if (!mask[s]) {
                    const Eigen::RowVectorXd diff =
                        mdp.transitions[expert_action].row(s) - mdp.transitions[a].row(s);
                    op.w.row(row) = diff * resolvent;
                }
                ++row;
            }
        }
    }
    return op;
}

nlohmann::json irl_solution_to_json(const IrlSolution& solution) {
    nlohmann::json j;
    j["reward"] = std::vector<double>(solution.reward.data(),
                                      solution.reward.data() + solution.reward.size());
    j["gammas"] = std::vector<double>(solution.gammas.data(),
                                      solution.gammas.data() + solution.gammas.size());
    j["objective"] = solution.objective;
    auto omega = nlohmann::json::array();
    for (const auto& [k, s, a] : solution.omega) omega.push_back({k, s, a});
    j["omega"] = std::move(omega);
    j["status"] = solution.status;
    j["diagnostics"] = {{"l1_penalty", solution.l1_penalty}, {"r_max", solution.r_max}};
    return j;
}

// Shared layout for the reward block: columns [0,S) hold r+, [S,2S) hold r-,
// each in [0, r_max], so r = r+ - r- and ||r||_1 <= 1'(r+ + r-) with equality
// at any optimum that has no incentive to inflate both sides.
namespace {

struct RewardBlock {
    int n_extra;
    LpProblem lp;

    RewardBlock(int S, int n_extra_vars, double r_max) : n_extra(n_extra_vars) {
        const int n = 2 * S + n_extra_vars;
        lp.objective = Vec::Zero(n);
        lp.lo = Vec::Zero(n);
        lp.hi = Vec::Constant(n, kInf);
        lp.hi.head(2 * S) = Vec::Constant(2 * S, r_max);
        lp.E = Mat(0, n);
        lp.f = Vec(0);
    }

    /// Gap row expressed over (r+, r-): w.(r+ - r-).
    void fill_gap(Eigen::Ref<Eigen::RowVectorXd> row, const Eigen::RowVectorXd& w) const {
        const int S = static_cast<int>(w.size());
        row.head(S) = w;
        row.segment(S, S) = -w;
    }
};

Vec extract_reward(const Vec& x, int S) { return x.head(S) - x.segment(S, S); }

}  // namespace

IrlSolution lp_irl_single(const TabularMdp& mdp, const DeterministicPolicy& expert, double gamma,
                          double l1_penalty, double r_max) {
    ExpertSet singleton;
    singleton.regime = ExpertRegime::Standard;
    singleton.policies.push_back(to_stochastic(expert, mdp.n_actions));
    Vec gammas(1);
    gammas << gamma;
    IrlSolution solution = naive_mplp(mdp, singleton, gammas, l1_penalty, r_max);
    return solution;
}

IrlSolution naive_mplp(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                       double l1_penalty, double r_max) {
    const int S = mdp.n_states;
    const int K = experts.size();
    const QGapOperator op = build_qgap_operator(mdp, experts, gammas);

    // Variables: r+, r-, u(k,s) with u the per-(expert,state) epigraph of the
    // minimal gap. u >= 0 is tight because every gap is constrained >= 0.
    RewardBlock block(S, K * S, r_max);
    auto u_col = [&](int k, int s) { return 2 * S + k * S + s; };
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) block.lp.objective[u_col(k, s)] = 1.0;
    block.lp.objective.head(S) = Vec::Constant(S, -l1_penalty);
    block.lp.objective.segment(S, S) = Vec::Constant(S, -l1_penalty);

    // Rows: u(k,s) - gap <= 0 and -gap <= 0, for every operator row.
    const int m = 2 * op.rows();
    block.lp.A = Mat::Zero(m, block.lp.n_vars());
    block.lp.b = Vec::Zero(m);
    for (int i = 0; i < op.rows(); ++i) {
        const auto& idx = op.index[i];
        Eigen::RowVectorXd gap_row = Eigen::RowVectorXd::Zero(block.lp.n_vars());
        block.fill_gap(gap_row.head(2 * S), op.w.row(i));
        block.lp.A.row(2 * i) = -gap_row;
        block.lp.A(2 * i, u_col(idx.k, idx.s)) = 1.0;
        block.lp.A.row(2 * i + 1) = -gap_row;
    }

    const LpSolution lp_solution = solve_lp(block.lp);
    if (lp_solution.status != LpStatus::Optimal)
        throw LpError("naive multi-expert LP unexpectedly " + to_string(lp_solution.status));

    IrlSolution solution;
    solution.reward = extract_reward(lp_solution.x, S);
    solution.gammas = gammas;
    solution.objective = lp_solution.objective_value;
    solution.status = "optimal";
    solution.l1_penalty = l1_penalty;
    solution.r_max = r_max;
    return solution;
}

OmegaReport compute_omega(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                          double r_max, double z_tol) {
    const int S = mdp.n_states;
    const int K = experts.size();
    const QGapOperator op = build_qgap_operator(mdp, experts, gammas);

    // Variables: r+, r-, z (one slack per operator row). Maximize -sum z.
    // The box is widened far beyond r_max: membership in Omega is a
    // scale-free separability question (any positive gap can be scaled past
    // the unit threshold), and a tight box would misclassify weakly
    // separable rows.
    RewardBlock block(S, op.rows(), std::max(r_max, 1.0) * 1e6);
    auto z_col = [&](int i) { return 2 * S + i; };
    for (int i = 0; i < op.rows(); ++i) block.lp.objective[z_col(i)] = -1.0;

    // Rows: -gap - z <= -1 and -gap <= 0.
    const int m = 2 * op.rows();
    block.lp.A = Mat::Zero(m, block.lp.n_vars());
    block.lp.b = Vec::Zero(m);
    for (int i = 0; i < op.rows(); ++i) {
        Eigen::RowVectorXd gap_row = Eigen::RowVectorXd::Zero(block.lp.n_vars());
        block.fill_gap(gap_row.head(2 * S), op.w.row(i));
        block.lp.A.row(2 * i) = -gap_row;
        block.lp.A(2 * i, z_col(i)) = -1.0;
        block.lp.b[2 * i] = -1.0;
        block.lp.A.row(2 * i + 1) = -gap_row;
    }

    const LpSolution lp_solution = solve_lp(block.lp);
    if (lp_solution.status != LpStatus::Optimal)
        throw LpError("omega LP unexpectedly " + to_string(lp_solution.status));

    OmegaReport report;
    report.slack = lp_solution.x.tail(op.rows());
    report.omega_k.resize(K);
    for (int i = 0; i < op.rows(); ++i) {
        if (report.slack[i] <= z_tol) {
            const auto& idx = op.index[i];
            report.omega_k[idx.k].push_back({idx.s, idx.a});
        }
    }

    const auto policies = hard_experts(experts);
    report.feasible = true;
    for (int i = 0; i < K && report.feasible; ++i) {
        for (int j = 0; j < K; ++j) {
            if (i == j) continue;
            bool separated = false;
            for (int s = 0; s < S && !separated; ++s) {
                const int aj = policies[j].action_of[s];
                if (aj == policies[i].action_of[s]) continue;
                const int row = op.find_row(i, s, aj);
                if (row >= 0 && report.slack[row] <= z_tol) separated = true;
            }
            if (!separated) {
                report.feasible = false;
                break;
            }
        }
    }
    return report;
}

IrlSolution mplp_inner(const TabularMdp& mdp, const ExpertSet& experts, const Vec& gammas,
                       const OmegaReport& omega, double l1_penalty, double r_max) {
    if (!omega.feasible)
        throw InfeasibleGamma("inner LP-IRL problem is infeasible under the given gammas");
    const int S = mdp.n_states;
    const QGapOperator op = build_qgap_operator(mdp, experts, gammas);

    // Variables: r+, r-, t. Maximize t - l1_penalty*||r||_1 with the min over
    // Omega lifted through the epigraph variable t.
    RewardBlock block(S, 1, r_max);
    const int t_col = 2 * S;
    block.lp.objective[t_col] = 1.0;
    block.lp.objective.head(2 * S) = Vec::Constant(2 * S, -l1_penalty);

    std::vector<int> omega_rows;
    for (int i = 0; i < op.rows(); ++i) {
        const auto& idx = op.index[i];
        for (const auto& [s, a] : omega.omega_k[idx.k]) {
            if (s == idx.s && a == idx.a) {
                omega_rows.push_back(i);
                break;
            }
        }
    }

    const int m = static_cast<int>(omega_rows.size()) + op.rows();
    block.lp.A = Mat::Zero(m, block.lp.n_vars());
    block.lp.b = Vec::Zero(m);
    int row = 0;
    for (int i : omega_rows) {  // t - gap <= 0
        Eigen::RowVectorXd gap_row = Eigen::RowVectorXd::Zero(block.lp.n_vars());
        block.fill_gap(gap_row.head(2 * S), op.w.row(i));
        block.lp.A.row(row) = -gap_row;
        block.lp.A(row, t_col) = 1.0;
        ++row;
    }
    for (int i = 0; i < op.rows(); ++i) {  // -gap <= 0
        Eigen::RowVectorXd gap_row = Eigen::RowVectorXd::Zero(block.lp.n_vars());
        block.fill_gap(gap_row.head(2 * S), op.w.row(i));
        block.lp.A.row(row) = -gap_row;
        ++row;
    }

    const LpSolution lp_solution = solve_lp(block.lp);
    if (lp_solution.status != LpStatus::Optimal)
        throw LpError("inner LP unexpectedly " + to_string(lp_solution.status));

    IrlSolution solution;
    solution.reward = extract_reward(lp_solution.x, S);
    solution.gammas = gammas;
    solution.objective = lp_solution.objective_value;
    for (int i : omega_rows) {
        const auto& idx = op.index[i];
        solution.omega.push_back({idx.k, idx.s, idx.a});
    }
    solution.status = "optimal";
    solution.l1_penalty = l1_penalty;
    solution.r_max = r_max;
    return solution;
}

}  // namespace mpirl
