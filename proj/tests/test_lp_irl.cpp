#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpirl/bayesopt.hpp"
#include "mpirl/lp_irl.hpp"
#include "oracles.hpp"

using namespace mpirl;

namespace {

ExpertSet toy_standard_experts(const TabularMdp& toy) {
    Vec gammas(3);
    gammas << 0.2, 0.6, 0.95;
    return make_experts(toy, gammas, ExpertRegime::Standard);
}

/// Eq-style objective of the single-expert LP at a given reward.
double single_expert_objective(const QGapOperator& op, const Vec& reward, double l1_penalty,
                               int n_states) {
    const Vec gaps = op.apply(reward);
    Vec min_gap = Vec::Constant(n_states, std::numeric_limits<double>::infinity());
    for (int i = 0; i < op.rows(); ++i)
        min_gap[op.index[i].s] = std::min(min_gap[op.index[i].s], gaps[i]);
    double total = 0.0;
    for (int s = 0; s < n_states; ++s)
        if (std::isfinite(min_gap[s])) total += min_gap[s];
    return total - l1_penalty * reward.lpNorm<1>();
}

}  // namespace

TEST_CASE("qgap operator reproduces value-iteration gaps") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);
    Vec gammas(3);
    gammas << 0.2, 0.6, 0.95;
    const QGapOperator op = build_qgap_operator(toy, experts, gammas);

    SUBCASE("zero reward gives zero gaps") {
        CHECK(op.apply(Vec::Zero(4)).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("rows at states with identical action rows vanish") {
        for (int i = 0; i < op.rows(); ++i) {
            if (op.index[i].s != 0) CHECK(op.w.row(i).lpNorm<Eigen::Infinity>() <= 1e-12);
        }
    }
    SUBCASE("true-reward gaps match value iteration within 1e-8") {
        const Vec gaps = op.apply(toy.reward);
        for (int i = 0; i < op.rows(); ++i) {
            const auto& idx = op.index[i];
            auto [report, policy] = value_iteration(toy, gammas[idx.k]);
            const double expected = report.q(idx.s, experts.deterministic(idx.k).action_of[idx.s]) -
                                    report.q(idx.s, idx.a);
            CHECK(gaps[i] == doctest::Approx(expected).epsilon(1e-8));
        }
        const int row = op.find_row(0, 0, 1);
        REQUIRE(row >= 0);
        CHECK(gaps[row] > 0.0);
    }
}

TEST_CASE("qgap identity holds on random instances") {
    Rng rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        const TabularMdp mdp = oracles::random_mdp(rng, 3 + rng.uniform_int(4), 2 + rng.uniform_int(3));
        const double gamma = rng.uniform(0.0, 0.95);
        auto [report, greedy] = value_iteration(mdp, gamma);
        ExpertSet experts;
        experts.regime = ExpertRegime::Standard;
        experts.policies.push_back(to_stochastic(greedy, mdp.n_actions));
        Vec gammas(1);
        gammas << gamma;
        const QGapOperator op = build_qgap_operator(mdp, experts, gammas);
        const Vec gaps = op.apply(mdp.reward);
        for (int i = 0; i < op.rows(); ++i) {
            const auto& idx = op.index[i];
            const double expected = report.q(idx.s, greedy.action_of[idx.s]) - report.q(idx.s, idx.a);
            CHECK(std::abs(gaps[i] - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST_CASE("single-expert LP-IRL recovers a reward that explains the expert") {
    const TabularMdp toy = build_toy();
    auto [report, expert] = value_iteration(toy, 0.2);

    SUBCASE("expert stays optimal under the learned reward") {
        const IrlSolution solution = lp_irl_single(toy, expert, 0.2, 0.0, 10.0);
        auto [re_report, re_greedy] = value_iteration(toy.with_reward(solution.reward), 0.2);
        CHECK(re_greedy.action_of[0] == expert.action_of[0]);
    }
    SUBCASE("an overwhelming l1 penalty zeroes the reward") {
        const IrlSolution solution = lp_irl_single(toy, expert, 0.2, 1e6, 10.0);
        CHECK(solution.reward.lpNorm<Eigen::Infinity>() <= 1e-7);
    }
}

TEST_CASE("LP optimum dominates any feasible candidate") {
    const TabularMdp toy = build_toy();
    auto [report, expert] = value_iteration(toy, 0.2);
    const IrlSolution solution = lp_irl_single(toy, expert, 0.2, 0.0, 10.0);

    ExpertSet single;
    single.regime = ExpertRegime::Standard;
    single.policies.push_back(to_stochastic(expert, 3));
    Vec gammas(1);
    gammas << 0.2;
    const QGapOperator op = build_qgap_operator(toy, single, gammas);
    const Vec scaled_truth = toy.reward * (10.0 / 10.0);
    CHECK(solution.objective >= single_expert_objective(op, scaled_truth, 0.0, 4) - 1e-7);
}

TEST_CASE("compute_omega separates experts and flags degenerate gammas") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);

    SUBCASE("distinct gammas are feasible with pairwise separation at s0") {
        Vec gammas(3);
        gammas << 0.2, 0.6, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        CHECK(omega.feasible);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (i == j) continue;
                const int aj = experts.deterministic(j).action_of[0];
                bool found = false;
                for (const auto& [s, a] : omega.omega_k[i])
                    if (s == 0 && a == aj) found = true;
                CHECK(found);
            }
        }
    }
    SUBCASE("a random box reward certifies pairwise separability at s0") {
        Vec gammas(3);
        gammas << 0.2, 0.6, 0.95;
        const QGapOperator op = build_qgap_operator(toy, experts, gammas);
        Rng rng(12);
        Mat separated = Mat::Zero(3, 3);
        for (int draw = 0; draw < 100000; ++draw) {
            Vec reward(4);
            for (int s = 0; s < 4; ++s) reward[s] = rng.uniform(-10.0, 10.0);
            const Vec gaps = op.apply(reward);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    if (i == j) continue;
                    const int row = op.find_row(i, 0, experts.deterministic(j).action_of[0]);
                    if (row >= 0 && gaps[row] > 0.0) separated(i, j) = 1.0;
                }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) CHECK(separated(i, j) == 1.0);
    }
    SUBCASE("single expert is vacuously feasible") {
        ExpertSet single;
        single.regime = ExpertRegime::Standard;
        single.policies.push_back(experts.policies[0]);
        Vec gammas(1);
        gammas << 0.2;
        const OmegaReport omega = compute_omega(toy, single, gammas);
        CHECK(omega.feasible);
        CHECK_FALSE(omega.omega_k[0].empty());
    }
    SUBCASE("duplicated gammas cannot separate both experts") {
        Vec gammas(3);
        gammas << 0.2, 0.95, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        CHECK_FALSE(omega.feasible);
    }
}

TEST_CASE("gap antisymmetry under equal gammas") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);
    Vec gammas(2);
    gammas << 0.7, 0.7;
    ExpertSet pair;
    pair.regime = ExpertRegime::Standard;
    pair.policies = {experts.policies[1], experts.policies[2]};
    const QGapOperator op = build_qgap_operator(toy, pair, gammas);

    // Experts disagree only at s0; self-loop probabilities scale the
    // antisymmetry: gap_i(s0, a_j)/(1 - gamma p_{a_j}) = -gap_j(s0, a_i)/(1 - gamma p_{a_i}).
    const int a1 = pair.deterministic(0).action_of[0];
    const int a2 = pair.deterministic(1).action_of[0];
    const int row12 = op.find_row(0, 0, a2);
    const int row21 = op.find_row(1, 0, a1);
    REQUIRE(row12 >= 0);
    REQUIRE(row21 >= 0);
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        Vec reward(4);
        for (int s = 0; s < 4; ++s) reward[s] = rng.uniform(-10.0, 10.0);
        const Vec gaps = op.apply(reward);
        CHECK(gaps[row12] * gaps[row21] <= 1e-12);  // both strictly positive is impossible
        const double scale1 = 1.0 - 0.7 * toy.transitions[a2](0, 0);
        const double scale2 = 1.0 - 0.7 * toy.transitions[a1](0, 0);
        CHECK(gaps[row12] / scale1 == doctest::Approx(-gaps[row21] / scale2).epsilon(1e-8));
    }
}

TEST_CASE("mplp inner solves the epigraph program") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);

    SUBCASE("at the published learned gammas it orders r(s2) above r(s1)") {
        Vec gammas(3);
        gammas << 0.0, 0.35, 1.0 - 1e-6;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        REQUIRE(omega.feasible);
        const IrlSolution solution = mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0);
        CHECK(solution.reward[2] > solution.reward[1]);
        for (int k = 0; k < 3; ++k) {
            auto [report, greedy] =
                value_iteration(toy.with_reward(solution.reward), gammas[k]);
            CHECK(greedy.action_of[0] == experts.deterministic(k).action_of[0]);
        }
    }
    SUBCASE("infeasible omega reports InfeasibleGamma") {
        Vec gammas(3);
        gammas << 0.2, 0.95, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        CHECK_THROWS_AS(mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0), InfeasibleGamma);
    }
    SUBCASE("constraint slack: every omega row clears the epigraph value") {
        Vec gammas(3);
        gammas << 0.2, 0.6, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        const IrlSolution solution = mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0);
        const QGapOperator op = build_qgap_operator(toy, experts, gammas);
        const Vec gaps = op.apply(solution.reward);
        CHECK(gaps.minCoeff() >= -1e-7);
        const double t_star = solution.objective + kDefaultL1Penalty * solution.reward.lpNorm<1>();
        for (const auto& [k, s, a] : solution.omega) {
            const int row = op.find_row(k, s, a);
            CHECK(gaps[row] >= t_star - 1e-6);
        }
    }
    SUBCASE("optimum dominates random feasible rewards") {
        Vec gammas(3);
        gammas << 0.2, 0.65, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        const IrlSolution solution = mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0);
        const QGapOperator op = build_qgap_operator(toy, experts, gammas);
        Rng rng(5);
        int feasible_draws = 0;
        for (int draw = 0; draw < 2000 && feasible_draws < 100; ++draw) {
            Vec reward(4);
            for (int s = 0; s < 4; ++s) reward[s] = rng.uniform(-10.0, 10.0);
            const Vec gaps = op.apply(reward);
            if (gaps.minCoeff() < 0.0) continue;
            ++feasible_draws;
            double t_candidate = std::numeric_limits<double>::infinity();
            for (const auto& [k, s, a] : solution.omega)
                t_candidate = std::min(t_candidate, gaps[op.find_row(k, s, a)]);
            const double candidate_objective = t_candidate - kDefaultL1Penalty * reward.lpNorm<1>();
            CHECK(solution.objective >= candidate_objective - 1e-7);
        }
        CHECK(feasible_draws > 0);
    }
    SUBCASE("scale invariance of reconstructed policies at zero penalty") {
        Vec gammas(3);
        gammas << 0.2, 0.65, 0.95;
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        const IrlSolution solution = mplp_inner(toy, experts, gammas, omega, 0.0, 10.0);
        for (double scale : {0.5, 2.0}) {
            for (int k = 0; k < 3; ++k) {
                auto [ra, ga] = value_iteration(toy.with_reward(solution.reward), gammas[k]);
                auto [rb, gb] =
                    value_iteration(toy.with_reward(scale * solution.reward), gammas[k]);
                CHECK(ga.action_of == gb.action_of);
            }
        }
    }
}

TEST_CASE("naive extension concentrates reward on the absorbing state at its degenerate optimum") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);
    Vec gammas(3);
    gammas << 0.0, 1.0, 1.0;  // capped internally
    const IrlSolution solution = naive_mplp(toy, experts, gammas, kDefaultL1Penalty, 10.0);
    for (int s = 0; s < 3; ++s) CHECK(std::abs(solution.reward[s]) <= 0.5);
    CHECK(solution.reward[3] > 5.0);
}

TEST_CASE("omega separability count is certified by random-reward search") {
    // The slack LP maximizes the number of strictly separable rows; any
    // single reward can only certify a lower bound on that count.
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);
    Vec gammas(3);
    gammas << 0.2, 0.6, 0.95;
    const QGapOperator op = build_qgap_operator(toy, experts, gammas);
    const OmegaReport omega = compute_omega(toy, experts, gammas);
    int separable_lp = 0;
    for (int i = 0; i < op.rows(); ++i)
        if (omega.slack[i] <= 1e-6) ++separable_lp;

    Rng rng(8080);
    int best_random = 0;
    for (int draw = 0; draw < 100000; ++draw) {
        Vec reward(4);
        for (int s = 0; s < 4; ++s) reward[s] = rng.uniform(-10.0, 10.0);
        const Vec gaps = op.apply(reward);
        if (gaps.minCoeff() < 0.0) continue;
        int positive = 0;
        for (int i = 0; i < op.rows(); ++i)
            if (gaps[i] > 1e-9) ++positive;
        best_random = std::max(best_random, positive);
    }
    CHECK(separable_lp >= best_random);
    CHECK(best_random > 0);
}

TEST_CASE("outer search certifies against a coarse grid baseline") {
    const TabularMdp toy = build_toy();
    const ExpertSet experts = toy_standard_experts(toy);
    const Objective objective = [&](const Vec& gammas) {
        const OmegaReport omega = compute_omega(toy, experts, gammas);
        const IrlSolution solution =
            mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0);
        return solution.objective;
    };
    const OuterTrace grid = grid_search(objective, 3, 0.2);
    OuterOptions bo;
    bo.max_iter = 100;
    bo.seed = 1;
    const OuterTrace outer = run_outer(
        [&](const Vec& gammas) {
            const OmegaReport omega = compute_omega(toy, experts, gammas);
            return mplp_inner(toy, experts, gammas, omega, kDefaultL1Penalty, 10.0).objective;
        },
        3, bo);
    CHECK(outer.best_score >= grid.best_score - 1e-3);
}
