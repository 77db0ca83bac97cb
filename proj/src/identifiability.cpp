#include "mpirl/identifiability.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

#include <Eigen/SVD>

#include "mpirl/eval.hpp"

namespace mpirl {

namespace {

/// Runs fn(i) for i in [0, count) across at most `threads` workers. Results
/// must be written into per-index slots so output order stays deterministic.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        workers.emplace_back([&, w]() {
            for (int i = w; i < count; i += threads) fn(i);
        });
    }
    for (auto& worker : workers) worker.join();
}

}  // namespace

std::string to_string(RewardClass c) {
    switch (c) {
        case RewardClass::NoReward: return "no_reward";
        case RewardClass::UniqueUpToConstant: return "unique_up_to_constant";
        case RewardClass::Underdetermined: return "underdetermined";
    }
    return "?";
}

std::pair<Mat, Vec> build_phi_b(const TabularMdp& mdp, const ExpertSet& experts,
                                const Vec& gammas) {
    if (gammas.size() > experts.size())
        throw ValidationError("more gammas than experts in build_phi_b");
    const int K = static_cast<int>(gammas.size());
    const int S = mdp.n_states, A = mdp.n_actions;
    const double lambda = mdp.temperature;

    Mat phi = Mat::Zero(K * A * S, (K + 1) * S);
    Vec b(K * A * S);
    for (int k = 0; k < K; ++k) {
        const double gamma = cap_gamma(gammas[k]);
        for (int a = 0; a < A; ++a) {
            for (int s = 0; s < S; ++s) {
                const int row = (k * A + a) * S + s;
                phi.block(row, 0, 1, S) = mdp.transitions[a].row(s);
                phi.block(row, (k + 1) * S, 1, S) = gamma * mdp.transitions[a].row(s);
                phi(row, (k + 1) * S + s) -= 1.0;
                const double p = experts.policies[k].probs(s, a);
                if (p <= 0.0)
                    throw ValidationError("expert policy has a zero probability; clip it first");
                b[row] = lambda * std::log(p);
            }
        }
    }
    return {std::move(phi), std::move(b)};
}

RankReport rank_classify(const Mat& phi, const Vec& b, double rank_tol) {
    RankReport report;
    Eigen::JacobiSVD<Mat> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    report.singular_values = svd.singularValues();
    const double sigma_max = report.singular_values.size() > 0 ? report.singular_values[0] : 0.0;
    const double cutoff = rank_tol * sigma_max;

    int rank = 0;
    bool borderline = false;
    for (int i = 0; i < report.singular_values.size(); ++i) {
        const double sigma = report.singular_values[i];
        if (sigma > cutoff) ++rank;
        if (cutoff > 0.0 && sigma > cutoff / 10.0 && sigma < cutoff * 10.0) borderline = true;
    }
    report.rank_phi = rank;

    Mat augmented(phi.rows(), phi.cols() + 1);
    augmented << phi, b;
    Eigen::JacobiSVD<Mat> svd_aug(augmented);
    const Vec sigma_aug = svd_aug.singularValues();
    const double cutoff_aug = rank_tol * (sigma_aug.size() > 0 ? sigma_aug[0] : 0.0);
    int rank_aug = 0;
    for (int i = 0; i < sigma_aug.size(); ++i) {
        const double sigma = sigma_aug[i];
        if (sigma > cutoff_aug) ++rank_aug;
        if (cutoff_aug > 0.0 && sigma > cutoff_aug / 10.0 && sigma < cutoff_aug * 10.0)
            borderline = true;
    }
    report.rank_phi_b = rank_aug;
    report.borderline = borderline;

    const int unique_rank = static_cast<int>(phi.cols()) - 1;
    if (report.rank_phi_b > report.rank_phi) {
        report.classification = RewardClass::NoReward;
    } else if (report.rank_phi == unique_rank) {
        report.classification = RewardClass::UniqueUpToConstant;
    } else {
        report.classification = RewardClass::Underdetermined;
    }

    if (report.rank_phi_b <= report.rank_phi) {
        // Minimum-norm solution through the SVD pseudoinverse.
        const Vec utb = svd.matrixU().transpose() * b;
        Vec scaled = Vec::Zero(report.singular_values.size());
        for (int i = 0; i < report.singular_values.size(); ++i) {
            if (report.singular_values[i] > cutoff) scaled[i] = utb[i] / report.singular_values[i];
        }
        // Full minimum-norm x = (r, V_1, ..., V_K); callers slice the reward.
        report.reward_solution = svd.matrixV() * scaled;
    }
    return report;
}

std::vector<GridScanEntry> grid_scan(const TabularMdp& mdp, const ExpertSet& experts,
                                     double grid_step, int k_count, int threads) {
    if (grid_step <= 0.0) throw ValidationError("grid step must be positive");
    if (k_count < 1 || k_count > experts.size())
        throw ValidationError("k_count out of range in grid_scan");

    ExpertSet subset;
    subset.regime = experts.regime;
    for (int k = 0; k < k_count; ++k) subset.policies.push_back(clip_policy(experts.policies[k]));

    const int points_per_axis = static_cast<int>(std::floor(1.0 / grid_step + 0.5)) + 1;
    std::vector<Vec> points;
    std::vector<int> idx(k_count, 0);
    while (true) {
        Vec gammas(k_count);
        for (int k = 0; k < k_count; ++k) gammas[k] = std::min(1.0, idx[k] * grid_step);
        bool distinct = true;
        for (int i = 0; i < k_count && distinct; ++i)
            for (int j = i + 1; j < k_count; ++j)
                if (std::abs(gammas[i] - gammas[j]) < grid_step / 2.0) distinct = false;
        if (distinct) points.push_back(std::move(gammas));
        int pos = k_count - 1;
        while (pos >= 0 && ++idx[pos] >= points_per_axis) idx[pos--] = 0;
        if (pos < 0) break;
    }

    std::vector<GridScanEntry> entries(points.size());
    parallel_for(static_cast<int>(points.size()), threads, [&](int i) {
        auto [phi, b] = build_phi_b(mdp, subset, points[i]);
        entries[i] = {points[i], rank_classify(phi, b)};
    });
    return entries;
}

namespace {

std::string format_gamma(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

}  // namespace

std::string grid_scan_csv(const std::vector<GridScanEntry>& entries) {
    std::string csv;
    if (entries.empty()) return csv;
    const int K = static_cast<int>(entries.front().gammas.size());
    for (int k = 1; k <= K; ++k) csv += "gamma_" + std::to_string(k) + ",";
    csv += "rank_phi,rank_phi_b,classification\n";
    for (const auto& entry : entries) {
        for (int k = 0; k < K; ++k) csv += format_gamma(entry.gammas[k]) + ",";
        csv += std::to_string(entry.report.rank_phi) + "," +
               std::to_string(entry.report.rank_phi_b) + "," +
               to_string(entry.report.classification) + "\n";
    }
    return csv;
}

std::vector<HeatmapCell> gen_error_heatmap(const DomainSpec& spec, const TabularMdp& mdp,
                                           const ExpertSet& experts_k2, double grid_step,
                                           int n_envs, uint64_t seed, int threads) {
    const auto entries = grid_scan(mdp, experts_k2, grid_step, 2, threads);
    const auto mask = mdp.absorbing_mask();
    // Solutions are identifiable only up to a constant; anchor the family by
    // matching the mean absorbing-state reward to the truth (absorbing
    // entries are where an additive shift actually changes greedy behavior,
    // since payment stops at absorption).
    double true_absorbing_mean = 0.0;
    int absorbing_count = 0;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mask[s]) {
            true_absorbing_mean += mdp.reward[s];
            ++absorbing_count;
        }
    }
    std::vector<const GridScanEntry*> consistent;
    for (const auto& entry : entries) {
        if (entry.report.rank_phi_b <= entry.report.rank_phi && entry.report.reward_solution)
            consistent.push_back(&entry);
    }
    std::vector<HeatmapCell> cells(consistent.size());
    parallel_for(static_cast<int>(consistent.size()), threads, [&](int i) {
        const GridScanEntry& entry = *consistent[i];
        Vec learned = entry.report.reward_solution->head(mdp.n_states);
        if (absorbing_count > 0) {
            double learned_absorbing_mean = 0.0;
            for (int s = 0; s < mdp.n_states; ++s)
                if (mask[s]) learned_absorbing_mean += learned[s];
            learned.array() += (true_absorbing_mean - learned_absorbing_mean) / absorbing_count;
        }
        GenEvalConfig config;
        config.n_envs = n_envs;
        config.seed = seed;
        config.domain = spec;
        config.learned_reward = learned;
        config.true_reward = mdp.reward;
        const GenEvalReport report = generalization_error(config, mdp);
        cells[i] = {entry.gammas[0], entry.gammas[1], report.mean};
    });
    return cells;
}

std::string heatmap_csv(const std::vector<HeatmapCell>& cells) {
    std::string csv = "gamma_1,gamma_2,gen_error\n";
    for (const auto& cell : cells) {
        csv += format_gamma(cell.gamma1) + "," + format_gamma(cell.gamma2) + "," +
               format_gamma(cell.gen_error) + "\n";
    }
    return csv;
}

}  // namespace mpirl
