#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpirl/bayesopt.hpp"
#include "mpirl/rng.hpp"

using namespace mpirl;

TEST_CASE("gp interpolates a single observation") {
    GpSurrogate gp(1);
    Vec x(1);
    x << 0.4;
    gp.add_observation(x, 2.5);
    gp.log_noise_var = std::log(1e-8);
    Mat query(1, 1);
    query << 0.4;
    auto [mean, var] = fit_predict(gp, query);
    CHECK(mean[0] == doctest::Approx(2.5).epsilon(1e-4));
}

TEST_CASE("gp far from data reverts to the prior") {
    GpSurrogate gp(1);
    for (double x0 : {0.0, 0.02, 0.05}) {
        Vec x(1);
        x << x0;
        gp.add_observation(x, 1.0 + x0);
    }
    gp.log_lengthscales = Vec::Constant(1, std::log(0.01));
    gp.log_signal_var = std::log(1.0);
    gp.log_noise_var = std::log(1e-6);
    Mat query(1, 1);
    query << 0.9;  // 85 length-scales away
    auto [mean, var] = fit_predict(gp, query);
    // Standardized prior mean is 0, i.e. the observation average raw.
    const double observed_mean = (1.0 + 1.02 + 1.05) / 3.0;
    CHECK(std::abs(mean[0] - observed_mean) <= 1e-3);
    CHECK(var[0] > 0.5 * std::exp(gp.log_signal_var) * 0.02 * 0.02 / 3.0);
}

TEST_CASE("gp regression tracks a sine curve between samples") {
    GpSurrogate gp(1);
    for (int i = 0; i <= 10; ++i) {
        Vec x(1);
        x << i / 10.0;
        gp.add_observation(x, std::sin(2.0 * M_PI * x[0]));
    }
    gp.fit_hyperparams(7);
    Mat query(41, 1);
    for (int i = 0; i <= 40; ++i) query(i, 0) = i / 40.0;
    auto [mean, var] = gp.predict(query);
    double rmse = 0.0;
    for (int i = 0; i <= 40; ++i) {
        const double err = mean[i] - std::sin(2.0 * M_PI * query(i, 0));
        rmse += err * err;
    }
    rmse = std::sqrt(rmse / 41.0);
    CHECK(rmse <= 0.1);
}

TEST_CASE("posterior interpolation error stays within noise at observed points") {
    GpSurrogate gp(2);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        Vec x(2);
        x << rng.uniform(), rng.uniform();
        gp.add_observation(x, x[0] * x[0] - x[1]);
    }
    gp.fit_hyperparams(11);
    Mat query(20, 2);
    for (int i = 0; i < 20; ++i) query.row(i) = gp.xs()[i].transpose();
    auto [mean, var] = gp.predict(query);
    const double noise_sd = std::sqrt(std::exp(gp.log_noise_var));
    for (int i = 0; i < 20; ++i) {
        CHECK(std::abs(mean[i] - gp.ys()[i]) <= 3.0 * noise_sd + 1e-6);
    }
}

TEST_CASE("expected improvement is nonnegative and zero at a noiseless incumbent") {
    CHECK(expected_improvement(0.0, 1.0, 1.0) >= 0.0);
    CHECK(expected_improvement(-2.0, 0.5, 1.0) >= 0.0);
    CHECK(expected_improvement(1.0, 0.0, 1.0) <= 1e-12);
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const double ei = expected_improvement(rng.uniform(-3, 3), rng.uniform(0, 4),
                                               rng.uniform(-3, 3));
        CHECK(ei >= 0.0);
    }
}

TEST_CASE("project_distinct enforces pairwise gaps inside the box") {
    Vec g(3);
    g << 0.5, 0.5, 0.5005;
    const Vec p = project_distinct(g, 1e-3);
    for (int i = 0; i < 3; ++i) {
        CHECK(p[i] >= 0.0);
        CHECK(p[i] <= 1.0);
        for (int j = i + 1; j < 3; ++j) CHECK(std::abs(p[i] - p[j]) >= 1e-3 - 1e-12);
    }
    Vec top(2);
    top << 1.0, 1.0;
    const Vec q = project_distinct(top, 1e-3);
    CHECK(q.maxCoeff() <= 1.0);
    CHECK(std::abs(q[0] - q[1]) >= 1e-3 - 1e-12);
}

TEST_CASE("run_outer finds a hidden quadratic optimum") {
    Vec hidden(3);
    hidden << 0.25, 0.6, 0.85;
    const Objective objective = [&](const Vec& g) { return -(g - hidden).squaredNorm(); };
    int hits = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        OuterOptions opts;
        opts.max_iter = 60;
        opts.seed = seed;
        const OuterTrace trace = run_outer(objective, 3, opts);
        CHECK(static_cast<int>(trace.records.size()) == 60);
        double best_dist = (trace.best_gammas - hidden).norm();
        if (best_dist <= 0.05) ++hits;
        // Monotone best-so-far.
        for (size_t i = 1; i < trace.records.size(); ++i)
            CHECK(trace.records[i].best_so_far >= trace.records[i - 1].best_so_far);
    }
    CHECK(hits == 10);
}

TEST_CASE("max_iter equal to n_init degenerates to random search") {
    const Objective objective = [](const Vec& g) { return g.sum(); };
    OuterOptions opts;
    opts.n_init = 8;
    opts.max_iter = 8;
    opts.seed = 3;
    const OuterTrace trace = run_outer(objective, 2, opts);
    CHECK(trace.records.size() == 8);
}

TEST_CASE("objective failures fall to the dynamic floor and the loop continues") {
    int calls = 0;
    const Objective objective = [&](const Vec& g) {
        ++calls;
        if (g[0] > 0.5) throw std::runtime_error("evaluator failure");
        return g[0];
    };
    OuterOptions opts;
    opts.n_init = 6;
    opts.max_iter = 20;
    opts.seed = 1;
    const OuterTrace trace = run_outer(objective, 1, opts);
    CHECK(trace.records.size() == 20);
    bool saw_failure = false;
    for (const auto& record : trace.records) {
        if (record.failed) {
            saw_failure = true;
            CHECK(record.score <= trace.best_score);
        }
    }
    CHECK(saw_failure);
    CHECK(trace.best_score <= 0.5 + 1e-9);
}

TEST_CASE("grid search enumerates the lattice deterministically") {
    std::vector<Vec> seen;
    const Objective objective = [&](const Vec& g) {
        seen.push_back(g);
        return -g.squaredNorm();
    };
    const OuterTrace trace = grid_search(objective, 1, 0.5);
    CHECK(trace.records.size() == 3);  // {0, 0.5, 1}
    CHECK(seen[0][0] == 0.0);
    CHECK(seen[1][0] == 0.5);
    CHECK(seen[2][0] == 1.0);
    CHECK(trace.best_gammas[0] == 0.0);
    CHECK(grid_search_size(3, 0.01) == 101L * 101L * 101L);
}

TEST_CASE("identical seeds reproduce traces bit for bit") {
    const Objective objective = [](const Vec& g) {
        return std::sin(7.0 * g[0]) * std::cos(3.0 * g[1]);
    };
    OuterOptions opts;
    opts.max_iter = 25;
    opts.seed = 42;
    const OuterTrace a = run_outer(objective, 2, opts);
    const OuterTrace b = run_outer(objective, 2, opts);
    CHECK(trace_csv(a) == trace_csv(b));
}
