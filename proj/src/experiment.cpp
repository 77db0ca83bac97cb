#include "mpirl/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "mpirl/eval.hpp"
#include "mpirl/identifiability.hpp"

namespace mpirl {

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::MplpIrl: return "mplp_irl";
        case Algorithm::MpmceIrl: return "mpmce_irl";
        case Algorithm::NaiveLp: return "naive_lp";
        case Algorithm::IdScan: return "id_scan";
        case Algorithm::GenEval: return "gen_eval";
        case Algorithm::ValueCurves: return "value_curves";
        case Algorithm::Experts: return "experts";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
    for (Algorithm algorithm :
         {Algorithm::MplpIrl, Algorithm::MpmceIrl, Algorithm::NaiveLp, Algorithm::IdScan,
          Algorithm::GenEval, Algorithm::ValueCurves, Algorithm::Experts}) {
        if (to_string(algorithm) == name) return algorithm;
    }
    throw ValidationError("unknown algorithm '" + name + "'");
}

namespace {

const std::set<std::string> kTopLevelKeys = {
    "algorithm", "domain",     "gammas",   "regime",     "l1_penalty", "r_max",
    "epsilon",   "temperature", "bo",      "grid_step",  "curve_step", "n_envs",
    "k",         "heatmap",    "learned_reward",         "seed",       "output_dir",
    "threads"};
const std::set<std::string> kDomainKeys = {"kind", "rows", "cols"};
const std::set<std::string> kBoKeys = {"n_init", "max_iter"};

Vec vec_from_json(const nlohmann::json& arr) {
    Vec v(static_cast<int>(arr.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    config.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        config.domain.kind = domain_kind_from_string(d.at("kind").get<std::string>());
        if (d.contains("rows")) config.domain.grid_rows = d.at("rows").get<int>();
        if (d.contains("cols")) config.domain.grid_cols = d.at("cols").get<int>();
        if (config.domain.kind == DomainKind::Cliff && !d.contains("rows")) {
            config.domain.grid_rows = 4;
            config.domain.grid_cols = 6;
        }
    }
    if (j.contains("gammas")) config.gammas = vec_from_json(j.at("gammas"));
    if (j.contains("regime")) {
        const std::string regime = j.at("regime").get<std::string>();
        config.regime = regime == "entropy" ? ExpertRegime::EntropyRegularized
                                            : ExpertRegime::Standard;
    }
    config.l1_penalty = j.value("l1_penalty", kDefaultL1Penalty);
    if (j.contains("r_max")) config.r_max = j.at("r_max").get<double>();
    config.epsilon = j.value("epsilon", 1e-6);
    config.temperature = j.value("temperature", 1.0);
    if (j.contains("bo")) {
        config.bo.n_init = j.at("bo").value("n_init", 0);
        config.bo.max_iter = j.at("bo").value("max_iter", 100);
    }
    config.grid_step = j.value("grid_step", 0.05);
    config.curve_step = j.value("curve_step", 0.01);
    config.n_envs = j.value("n_envs", 100);
    config.k_experts = j.value("k", 2);
    config.heatmap = j.value("heatmap", false);
    if (j.contains("learned_reward")) config.learned_reward = vec_from_json(j.at("learned_reward"));
    config.seed = j.value("seed", uint64_t{0});
    config.bo.seed = config.seed;
    config.output_dir = j.value("output_dir", std::string("."));
    config.threads = j.value("threads", 1);
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["algorithm"] = to_string(config.algorithm);
    j["domain"] = {{"kind", to_string(config.domain.kind)},
                   {"rows", config.domain.grid_rows},
                   {"cols", config.domain.grid_cols}};
    if (config.gammas)
        j["gammas"] = std::vector<double>(config.gammas->data(),
                                          config.gammas->data() + config.gammas->size());
    if (config.regime)
        j["regime"] = *config.regime == ExpertRegime::EntropyRegularized ? "entropy" : "standard";
    j["l1_penalty"] = config.l1_penalty;
    if (config.r_max) j["r_max"] = *config.r_max;
    j["epsilon"] = config.epsilon;
    j["temperature"] = config.temperature;
    j["bo"] = {{"n_init", config.bo.n_init}, {"max_iter", config.bo.max_iter}};
    j["grid_step"] = config.grid_step;
    j["curve_step"] = config.curve_step;
    j["n_envs"] = config.n_envs;
    j["k"] = config.k_experts;
    j["heatmap"] = config.heatmap;
    if (config.learned_reward)
        j["learned_reward"] = std::vector<double>(
            config.learned_reward->data(),
            config.learned_reward->data() + config.learned_reward->size());
    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    j["threads"] = config.threads;
    return j;
}

std::vector<std::string> validate(const nlohmann::json& j) {
    std::vector<std::string> diagnostics;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!kTopLevelKeys.count(it.key())) diagnostics.push_back("unknown key '" + it.key() + "'");
    }
    if (!j.contains("algorithm")) {
        diagnostics.push_back("missing required key 'algorithm'");
        return diagnostics;
    }
    std::optional<Algorithm> algorithm;
    try {
        algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    } catch (const std::exception& e) {
        diagnostics.push_back(e.what());
    }
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        for (auto it = d.begin(); it != d.end(); ++it) {
            if (!kDomainKeys.count(it.key()))
                diagnostics.push_back("unknown key 'domain." + it.key() + "'");
        }
        if (d.contains("kind")) {
            try {
                const DomainKind kind = domain_kind_from_string(d.at("kind").get<std::string>());
                const int rows = d.value("rows", kind == DomainKind::Cliff ? 4 : 5);
                const int cols = d.value("cols", kind == DomainKind::Cliff ? 6 : 5);
                const int min_dim = kind == DomainKind::Cliff ? 3 : 2;
                if (kind != DomainKind::Toy && (rows < min_dim || cols < min_dim))
                    diagnostics.push_back("grid dimensions below the domain minimum");
            } catch (const std::exception& e) {
                diagnostics.push_back(e.what());
            }
        } else {
            diagnostics.push_back("domain requires 'kind'");
        }
    }
    if (j.contains("bo")) {
        for (auto it = j.at("bo").begin(); it != j.at("bo").end(); ++it) {
            if (!kBoKeys.count(it.key())) diagnostics.push_back("unknown key 'bo." + it.key() + "'");
        }
    }
    if (j.contains("gammas")) {
        const auto& g = j.at("gammas");
        bool increasing = true;
        for (size_t i = 0; i < g.size(); ++i) {
            const double value = g[i].get<double>();
            if (value < 0.0 || value >= 1.0)
                diagnostics.push_back("gamma " + std::to_string(value) + " outside [0, 1)");
            if (i > 0 && value <= g[i - 1].get<double>()) increasing = false;
        }
        if (!increasing)
            diagnostics.push_back("gammas must be strictly increasing (pairwise distinct)");
        if (g.size() < 2 && algorithm &&
            (*algorithm == Algorithm::MplpIrl || *algorithm == Algorithm::MpmceIrl ||
             *algorithm == Algorithm::NaiveLp || *algorithm == Algorithm::Experts))
            diagnostics.push_back("at least two expert gammas are required");
    }
    if (j.value("n_envs", 100) < 1) diagnostics.push_back("n_envs must be >= 1");
    if (j.value("grid_step", 0.05) <= 0.0) diagnostics.push_back("grid_step must be > 0");
    if (j.value("curve_step", 0.01) <= 0.0) diagnostics.push_back("curve_step must be > 0");
    if (j.value("l1_penalty", kDefaultL1Penalty) < 0.0) diagnostics.push_back("l1_penalty must be >= 0");
    if (j.contains("r_max") && j.at("r_max").get<double>() <= 0.0)
        diagnostics.push_back("r_max must be > 0");
    if (j.value("epsilon", 1e-6) <= 0.0) diagnostics.push_back("epsilon must be > 0");
    if (j.value("temperature", 1.0) <= 0.0) diagnostics.push_back("temperature must be > 0");
    if (j.value("threads", 1) < 1) diagnostics.push_back("threads must be >= 1");
    if (j.value("k", 2) < 1) diagnostics.push_back("k must be >= 1");
    if (algorithm && *algorithm == Algorithm::GenEval && !j.contains("learned_reward"))
        diagnostics.push_back("gen_eval requires 'learned_reward'");
    return diagnostics;
}

Objective mplp_objective(const TabularMdp& mdp, const ExpertSet& experts, double l1_penalty,
                         double r_max) {
    return [mdp, experts, l1_penalty, r_max](const Vec& gammas) {
        const OmegaReport omega = compute_omega(mdp, experts, gammas, r_max);
        const IrlSolution solution = mplp_inner(mdp, experts, gammas, omega, l1_penalty, r_max);
        return solution.objective;
    };
}

Objective naive_objective(const TabularMdp& mdp, const ExpertSet& experts, double l1_penalty,
                          double r_max) {
    return [mdp, experts, l1_penalty, r_max](const Vec& gammas) {
        return naive_mplp(mdp, experts, gammas, l1_penalty, r_max).objective;
    };
}

Objective mpmce_objective(const TabularMdp& mdp, const ExpertSet& experts,
                          const InnerSolveOptions& opts) {
    // Warm-start cache: nearest previously evaluated Gamma seeds theta. The
    // outer loop is sequential by contract, so plain shared state is fine.
    auto cache = std::make_shared<std::vector<std::pair<Vec, Vec>>>();
    return [mdp, experts, opts, cache](const Vec& gammas) {
        InnerSolveOptions local = opts;
        double best_distance = std::numeric_limits<double>::infinity();
        for (const auto& [point, theta] : *cache) {
            const double distance = (point - gammas).norm();
            if (distance < best_distance) {
                best_distance = distance;
                local.warm_start = theta;
            }
        }
        const InnerOutcome outcome = solve_inner_dual(mdp, experts, gammas, local);
        cache->push_back({gammas, outcome.dual.theta});
        return outcome.score;
    };
}

Vec display_reward(const TabularMdp& mdp, const Vec& theta, double r_max) {
    Vec centered = theta.array() - theta.mean();
    Vec reward = mdp.features * centered;
    double absorbing_max = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_absorbing(s)) absorbing_max = std::max(absorbing_max, reward[s]);
    }
    if (std::isfinite(absorbing_max)) reward.array() += r_max - absorbing_max;
    return reward;
}

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << contents;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

struct RunContext {
    const ExperimentConfig& config;
    fs::path out;
    TabularMdp mdp;
    Vec gammas;           // expert generation gammas
    ExpertRegime regime;
    double r_max;
};

ExpertSet build_experts(const RunContext& ctx) { return make_experts(ctx.mdp, ctx.gammas, ctx.regime); }

GenEvalReport evaluate_reward(const RunContext& ctx, const Vec& learned) {
    GenEvalConfig config;
    config.n_envs = ctx.config.n_envs;
    config.seed = ctx.config.seed;
    config.domain = ctx.config.domain;
    config.learned_reward = learned;
    config.true_reward = ctx.mdp.reward;
    return generalization_error(config, ctx.mdp);
}

void run_lp_family(const RunContext& ctx, bool naive) {
    const ExpertSet experts = build_experts(ctx);
    const Objective objective =
        naive ? naive_objective(ctx.mdp, experts, ctx.config.l1_penalty, ctx.r_max)
              : mplp_objective(ctx.mdp, experts, ctx.config.l1_penalty, ctx.r_max);
    OuterOptions bo = ctx.config.bo;
    bo.seed = ctx.config.seed;
    const OuterTrace trace = run_outer(objective, experts.size(), bo);
    write_file(ctx.out / "trace.csv", trace_csv(trace));
    if (!trace.has_best()) throw std::runtime_error("outer loop found no feasible point");

    IrlSolution solution;
    if (naive) {
        solution = naive_mplp(ctx.mdp, experts, trace.best_gammas, ctx.config.l1_penalty, ctx.r_max);
    } else {
        const OmegaReport omega = compute_omega(ctx.mdp, experts, trace.best_gammas, ctx.r_max);
        solution =
            mplp_inner(ctx.mdp, experts, trace.best_gammas, omega, ctx.config.l1_penalty, ctx.r_max);
    }
    nlohmann::json j = irl_solution_to_json(solution);
    j["best_score"] = trace.best_score;
    j["order_match"] = order_recovery(trace.best_gammas, ctx.gammas);
    write_json(ctx.out / "solution.json", j);

    const GenEvalReport report = evaluate_reward(ctx, solution.reward);
    write_json(ctx.out / "gen_eval.json", gen_eval_report_to_json(report));
}

void run_mpmce(const RunContext& ctx) {
    const ExpertSet experts = build_experts(ctx);
    InnerSolveOptions inner;
    inner.epsilon = ctx.config.epsilon;
    const Objective objective = mpmce_objective(ctx.mdp, experts, inner);
    OuterOptions bo = ctx.config.bo;
    bo.seed = ctx.config.seed;
    const OuterTrace trace = run_outer(objective, experts.size(), bo);
    write_file(ctx.out / "trace.csv", trace_csv(trace));
    if (!trace.has_best()) throw std::runtime_error("outer loop found no feasible point");

    const InnerOutcome outcome = solve_inner_dual(ctx.mdp, experts, trace.best_gammas, inner);
    nlohmann::json j = dual_solution_to_json(outcome.dual, trace.best_gammas);
    j["score"] = outcome.score;
    j["feasible"] = outcome.feasible;
    j["order_match"] = order_recovery(trace.best_gammas, ctx.gammas);
    const Vec reward = display_reward(ctx.mdp, outcome.dual.theta, ctx.r_max);
    j["reward_display"] =
        std::vector<double>(reward.data(), reward.data() + reward.size());
    write_json(ctx.out / "solution.json", j);

    const GenEvalReport report = evaluate_reward(ctx, reward);
    write_json(ctx.out / "gen_eval.json", gen_eval_report_to_json(report));
}

void run_id_scan(const RunContext& ctx) {
    const ExpertSet experts = build_experts(ctx);
    const int k = std::min(ctx.config.k_experts, experts.size());
    const auto entries = grid_scan(ctx.mdp, experts, ctx.config.grid_step, k, ctx.config.threads);
    write_file(ctx.out / "scan.csv", grid_scan_csv(entries));
    if (ctx.config.heatmap && k == 2) {
        ExpertSet pair;
        pair.regime = experts.regime;
        pair.policies = {experts.policies[0], experts.policies[1]};
        const auto cells = gen_error_heatmap(ctx.config.domain, ctx.mdp, pair,
                                             ctx.config.grid_step, ctx.config.n_envs,
                                             ctx.config.seed, ctx.config.threads);
        write_file(ctx.out / "heatmap.csv", heatmap_csv(cells));
    }
}

}  // namespace

int run(const ExperimentConfig& config) {
    RunContext ctx{config, fs::path(config.output_dir), TabularMdp{}, Vec{}, ExpertRegime::Standard,
                   0.0};
    fs::create_directories(ctx.out);
    try {
        ctx.mdp = build_domain(config.domain);
        ctx.mdp.temperature = config.temperature;
        ctx.regime = config.regime.value_or(
            (config.algorithm == Algorithm::MpmceIrl || config.algorithm == Algorithm::IdScan)
                ? ExpertRegime::EntropyRegularized
                : ExpertRegime::Standard);
        ctx.gammas = config.gammas.value_or(default_gammas(config.domain.kind, ctx.regime));
        ctx.r_max = config.r_max.value_or(default_r_max(config.domain.kind));

        switch (config.algorithm) {
            case Algorithm::Experts: {
                const ExpertSet experts = build_experts(ctx);
                write_json(ctx.out / "experts.json", expert_set_to_json(experts));
                break;
            }
            case Algorithm::MplpIrl: run_lp_family(ctx, false); break;
            case Algorithm::NaiveLp: run_lp_family(ctx, true); break;
            case Algorithm::MpmceIrl: run_mpmce(ctx); break;
            case Algorithm::IdScan: run_id_scan(ctx); break;
            case Algorithm::GenEval: {
                const GenEvalReport report = evaluate_reward(ctx, *config.learned_reward);
                write_json(ctx.out / "gen_eval.json", gen_eval_report_to_json(report));
                break;
            }
            case Algorithm::ValueCurves: {
                const ExpertSet experts = build_experts(ctx);
                std::vector<double> grid;
                for (double g = 0.0; g <= 1.0 + 1e-12; g += config.curve_step) grid.push_back(g);
                const Vec reward = config.learned_reward.value_or(ctx.mdp.reward);
                const auto points = value_curves(ctx.mdp, reward, experts.policies, grid);
                write_file(ctx.out / "curves.csv", value_curves_csv(points));
                break;
            }
        }
    } catch (const std::exception& e) {
        write_json(ctx.out / "error.json",
                   {{"error", e.what()}, {"algorithm", to_string(config.algorithm)}});
        return 3;
    }
    return 0;
}

}  // namespace mpirl
