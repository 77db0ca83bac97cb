#include "mpirl/domains.hpp"

#include <cmath>

#include <json.hpp>

#include "mpirl/rng.hpp"

namespace mpirl {

namespace {

// Grid actions in spec order.
constexpr int kRight = 0, kDown = 1, kLeft = 2, kUp = 3;
constexpr int kDr[4] = {0, 1, 0, -1};
constexpr int kDc[4] = {1, 0, -1, 0};

int move_or_stay(int s, int dir, int rows, int cols) {
    const int r = s / cols, c = s % cols;
    const int nr = r + kDr[dir], nc = c + kDc[dir];
    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) return s;
    return nr * cols + nc;
}

std::vector<Mat> grid_transitions(int rows, int cols, const std::vector<char>& absorbing,
                                  double intended_prob) {
    const int S = rows * cols;
    std::vector<Mat> transitions(4, Mat::Zero(S, S));
    const double slip = (1.0 - intended_prob) / 3.0;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < 4; ++a) {
            if (absorbing[s]) {
                transitions[a](s, s) = 1.0;
                continue;
            }
            for (int dir = 0; dir < 4; ++dir) {
                const double p = (dir == a) ? intended_prob : slip;
                if (p > 0.0) transitions[a](s, move_or_stay(s, dir, rows, cols)) += p;
            }
        }
    }
    return transitions;
}

Vec uniform_over_nonabsorbing(const std::vector<char>& absorbing) {
    const int S = static_cast<int>(absorbing.size());
    Vec rho0 = Vec::Zero(S);
    int count = 0;
    for (int s = 0; s < S; ++s) count += absorbing[s] ? 0 : 1;
    for (int s = 0; s < S; ++s) rho0[s] = absorbing[s] ? 0.0 : 1.0 / count;
    return rho0;
}

bool policies_identical(const StochasticPolicy& a, const StochasticPolicy& b) {
    return (a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-12;
}

}  // namespace

std::string to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::Toy: return "toy";
        case DomainKind::BigSmall: return "big_small";
        case DomainKind::Cliff: return "cliff";
    }
    return "?";
}

DomainKind domain_kind_from_string(const std::string& name) {
    if (name == "toy") return DomainKind::Toy;
    if (name == "big_small") return DomainKind::BigSmall;
    if (name == "cliff") return DomainKind::Cliff;
    throw ValidationError("unknown domain kind '" + name + "'");
}

TabularMdp build_toy() {
    const int S = 4, A = 3;
    std::vector<Mat> transitions(A, Mat::Zero(S, S));
    // From s0, each action reaches its target with some probability and
    // stays put otherwise.
    const int target[3] = {3, 1, 2};
    const double success[3] = {0.95, 0.9, 0.6};
    for (int a = 0; a < A; ++a) {
        transitions[a](0, target[a]) = success[a];
        transitions[a](0, 0) = 1.0 - success[a];
        transitions[a](1, 3) = 1.0;
        transitions[a](2, 3) = 1.0;
        transitions[a](3, 3) = 1.0;
    }
    Vec reward(S);
    reward << 0.0, 6.0, 7.0, 10.0;
    Vec rho0 = Vec::Zero(S);
    rho0[0] = 1.0;
    return make_mdp(S, A, std::move(transitions), std::move(reward), std::move(rho0));
}

TabularMdp build_big_small(int rows, int cols) {
    if (rows < 2 || cols < 2) throw ValidationError("big-small grid must be at least 2x2");
    const int S = rows * cols;
    const int small_cell = (rows - 1) * cols;             // bottom-left
    const int big_cell = (rows - 1) * cols + (cols - 1);  // bottom-right
    std::vector<char> absorbing(S, 0);
    absorbing[small_cell] = absorbing[big_cell] = 1;

    Vec reward = Vec::Constant(S, -2.0);
    reward[small_cell] = 2.0;
    reward[big_cell] = 20.0;

    return make_mdp(S, 4, grid_transitions(rows, cols, absorbing, 1.0), std::move(reward),
                    uniform_over_nonabsorbing(absorbing));
}

TabularMdp build_cliff(int rows, int cols) {
    if (rows < 3 || cols < 3) throw ValidationError("cliff grid must be at least 3x3");
    const int S = rows * cols;
    std::vector<char> absorbing(S, 0);
    for (int c = 0; c < cols; ++c) absorbing[c] = 1;  // whole top row, goal included

    Vec reward(S);
    for (int s = 0; s < S; ++s) {
        const int r = s / cols;
        if (r == 0) {
            reward[s] = -10.0;
        } else if (r == 1) {
            reward[s] = -2.0;  // close to the cliff
        } else {
            reward[s] = -1.0;
        }
    }
    reward[cols - 1] = 20.0;  // goal at the top-right corner

    return make_mdp(S, 4, grid_transitions(rows, cols, absorbing, 0.9), std::move(reward),
                    uniform_over_nonabsorbing(absorbing));
}

TabularMdp build_domain(const DomainSpec& spec) {
    switch (spec.kind) {
        case DomainKind::Toy: return build_toy();
        case DomainKind::BigSmall: return build_big_small(spec.grid_rows, spec.grid_cols);
        case DomainKind::Cliff: return build_cliff(spec.grid_rows, spec.grid_cols);
    }
    throw ValidationError("unhandled domain kind");
}

Vec default_gammas(DomainKind kind, ExpertRegime regime) {
    Vec g(3);
    if (regime == ExpertRegime::Standard) {
        switch (kind) {
            case DomainKind::Toy: g << 0.2, 0.65, 0.95; break;
            case DomainKind::BigSmall: g << 0.25, 0.65, 0.9; break;
            case DomainKind::Cliff: g << 0.2, 0.45, 0.65; break;
        }
    } else {
        switch (kind) {
            case DomainKind::Toy: g << 0.3, 0.5, 0.95; break;
            case DomainKind::BigSmall: g << 0.1, 0.45, 0.9; break;
            case DomainKind::Cliff: g << 0.0, 0.2, 0.52; break;
        }
    }
    return g;
}

double default_r_max(DomainKind kind) { return kind == DomainKind::Toy ? 10.0 : 20.0; }

ExpertSet make_experts(const TabularMdp& mdp, const Vec& gammas, ExpertRegime regime) {
    if (gammas.size() < 2) throw ValidationError("an expert set needs at least two experts");
    for (int k = 0; k + 1 < gammas.size(); ++k) {
        if (!(gammas[k] < gammas[k + 1]))
            throw ValidationError("expert gammas must be strictly increasing");
    }
    ExpertSet experts;
    experts.regime = regime;
    experts.true_gammas = gammas;
    for (int k = 0; k < gammas.size(); ++k) {
        if (regime == ExpertRegime::Standard) {
            auto [report, policy] = value_iteration(mdp, gammas[k]);
            experts.policies.push_back(to_stochastic(policy, mdp.n_actions));
        } else {
            auto [report, policy] = soft_value_iteration(mdp, gammas[k]);
            experts.policies.push_back(std::move(policy));
        }
    }
    for (int i = 0; i < experts.size(); ++i) {
        for (int j = i + 1; j < experts.size(); ++j) {
            if (policies_identical(experts.policies[i], experts.policies[j])) {
                throw AssumptionViolation(
                    "experts " + std::to_string(i) + " and " + std::to_string(j) +
                    " (gammas " + std::to_string(gammas[i]) + ", " + std::to_string(gammas[j]) +
                    ") induce identical policies");
            }
        }
    }
    return experts;
}

std::pair<TabularMdp, double> randomize_environment(const DomainSpec& spec, const TabularMdp& base,
                                                    uint64_t rng_seed) {
    Rng rng(rng_seed);
    TabularMdp mdp = base;
    if (spec.kind == DomainKind::Toy) {
        // Only the rows out of s0 are resampled; s1, s2 still reach the
        // absorbing state with probability 1.
        const int target[3] = {3, 1, 2};
        for (int a = 0; a < 3; ++a) {
            const double p = rng.uniform();
            mdp.transitions[a].row(0).setZero();
            mdp.transitions[a](0, target[a]) = p;
            mdp.transitions[a](0, 0) += 1.0 - p;
        }
    } else {
        const double eps = rng.uniform();
        const auto absorbing = base.absorbing_mask();
        mdp.transitions = grid_transitions(spec.grid_rows, spec.grid_cols, absorbing, eps);
    }
    const double gamma = rng.uniform(0.0, 0.999);
    mdp.validate();
    return {std::move(mdp), gamma};
}

nlohmann::json expert_set_to_json(const ExpertSet& experts) {
    nlohmann::json j;
    auto policies = nlohmann::json::array();
    for (const auto& policy : experts.policies) {
        auto rows = nlohmann::json::array();
        for (int s = 0; s < policy.probs.rows(); ++s) {
            auto row = nlohmann::json::array();
            for (int a = 0; a < policy.probs.cols(); ++a) row.push_back(policy.probs(s, a));
            rows.push_back(std::move(row));
        }
        policies.push_back(std::move(rows));
    }
    j["policies"] = std::move(policies);
    if (experts.true_gammas) {
        j["true_gammas"] = std::vector<double>(experts.true_gammas->data(),
                                               experts.true_gammas->data() + experts.true_gammas->size());
    }
    j["regime"] = experts.regime == ExpertRegime::Standard ? "standard" : "entropy";
    return j;
}

ExpertSet expert_set_from_json(const nlohmann::json& j) {
    ExpertSet experts;
    for (const auto& rows : j.at("policies")) {
        const int S = static_cast<int>(rows.size());
        const int A = static_cast<int>(rows.at(0).size());
        Mat probs(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) probs(s, a) = rows[s][a].get<double>();
        experts.policies.push_back({std::move(probs)});
    }
    if (j.contains("true_gammas")) {
        const auto& arr = j.at("true_gammas");
        Vec g(static_cast<int>(arr.size()));
        for (int i = 0; i < g.size(); ++i) g[i] = arr[i].get<double>();
        experts.true_gammas = std::move(g);
    }
    const std::string regime = j.value("regime", "standard");
    experts.regime = regime == "entropy" ? ExpertRegime::EntropyRegularized : ExpertRegime::Standard;
    return experts;
}

}  // namespace mpirl
