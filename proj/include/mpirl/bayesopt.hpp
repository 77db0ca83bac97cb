#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mpirl/common.hpp"

namespace mpirl {

/// Exact GP regression with a Matern-5/2 ARD kernel on observations
/// standardized to zero mean / unit variance. Hyperparameters live in log
/// space and are refit by maximizing the marginal likelihood.
class GpSurrogate {
  public:
    explicit GpSurrogate(int dim);

    void add_observation(const Vec& x, double y);
    int size() const { return static_cast<int>(y_.size()); }
    int dim() const { return dim_; }

    /// Multi-restart compass search over log hyperparameters. Deterministic
    /// for a fixed seed and observation set.
    void fit_hyperparams(uint64_t seed, int restarts = 8);

    /// Cholesky factorization with an escalating jitter ladder; throws when
    /// the kernel matrix stays non-positive-definite.
    void factorize();

    /// Posterior mean/variance per query row, de-standardized.
    std::pair<Vec, Vec> predict(const Mat& queries) const;

    double best_observed() const;
    const std::vector<Vec>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }

    Vec log_lengthscales;  // bounded to [log 0.01, log 2]
    double log_signal_var = 0.0;
    double log_noise_var = -18.0;

  private:
    double marginal_likelihood() const;
    Mat kernel_matrix() const;
    Vec kernel_column(const Vec& query) const;

    int dim_;
    std::vector<Vec> x_;
    std::vector<double> y_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    Mat chol_;   // lower factor of K + noise + jitter
    Vec alpha_;  // K^{-1} z
    bool factorized_ = false;
};

/// Expected improvement against the best standardized observation.
double expected_improvement(double mean, double variance, double incumbent);

struct OuterRecord {
    int iteration = 0;
    Vec gammas;
    double score = 0.0;
    double best_so_far = 0.0;
    bool failed = false;
};

struct OuterTrace {
    std::vector<OuterRecord> records;
    Vec best_gammas;
    double best_score = 0.0;

    bool has_best() const { return best_gammas.size() > 0; }
};

std::string trace_csv(const OuterTrace& trace);

using Objective = std::function<double(const Vec&)>;

struct OuterOptions {
    int n_init = 0;  // 0 means 5*K
    int max_iter = 100;
    uint64_t seed = 0;
    double distinct_gap = 1e-3;  // acquisition keeps |gamma_i - gamma_j| >= this
    int acquisition_starts = 256;
};

/// Bayesian optimization over [0,1]^K: uniform initialization, then
/// fit-posterior / maximize-EI / evaluate. Objective failures are recorded
/// at a dynamic floor (min observed minus 3x the observed range) and the
/// loop continues.
OuterTrace run_outer(const Objective& objective, int k, const OuterOptions& opts = {});

/// Exhaustive lattice evaluation with distinct-coordinate filtering; the
/// certification baseline for the outer loop.
OuterTrace grid_search(const Objective& objective, int k, double step);

/// Number of lattice points grid_search would evaluate (before filtering).
long grid_search_size(int k, double step);

std::pair<Vec, Vec> fit_predict(GpSurrogate& surrogate, const Mat& queries);

/// Pushes coordinates apart until all pairwise gaps reach min_gap, staying
/// inside [0,1].
Vec project_distinct(Vec gammas, double min_gap);

}  // namespace mpirl
