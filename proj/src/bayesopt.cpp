#include "mpirl/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "mpirl/rng.hpp"

namespace mpirl {

namespace {

constexpr double kLogLsLo = -4.605170185988091;  // log 0.01
constexpr double kLogLsHi = 0.6931471805599453;  // log 2
constexpr double kLogSfLo = -6.9, kLogSfHi = 6.9;
constexpr double kLogSnLo = -23.0, kLogSnHi = -4.6;

double matern52(double d) {
    const double s = std::sqrt(5.0) * d;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

}  // namespace

GpSurrogate::GpSurrogate(int dim) : dim_(dim) {
    log_lengthscales = Vec::Constant(dim, std::log(0.5));
}

void GpSurrogate::add_observation(const Vec& x, double y) {
    x_.push_back(x);
    y_.push_back(y);
    factorized_ = false;
}

double GpSurrogate::best_observed() const {
    double best = -std::numeric_limits<double>::infinity();
    for (double y : y_) best = std::max(best, y);
    return best;
}

Mat GpSurrogate::kernel_matrix() const {
    const int n = size();
    Mat k(n, n);
    const Vec inv_ls = (-log_lengthscales).array().exp();
    const double sf2 = std::exp(log_signal_var);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double d = ((x_[i] - x_[j]).cwiseProduct(inv_ls)).norm();
            k(i, j) = k(j, i) = sf2 * matern52(d);
        }
    }
    return k;
}

Vec GpSurrogate::kernel_column(const Vec& query) const {
    const int n = size();
    Vec col(n);
    const Vec inv_ls = (-log_lengthscales).array().exp();
    const double sf2 = std::exp(log_signal_var);
    for (int i = 0; i < n; ++i) {
        const double d = ((x_[i] - query).cwiseProduct(inv_ls)).norm();
        col[i] = sf2 * matern52(d);
    }
    return col;
}

void GpSurrogate::factorize() {
    const int n = size();
    if (n == 0) throw std::runtime_error("GP needs at least one observation");
    y_mean_ = std::accumulate(y_.begin(), y_.end(), 0.0) / n;
    double var = 0.0;
    for (double y : y_) var += (y - y_mean_) * (y - y_mean_);
    y_scale_ = n > 1 ? std::sqrt(var / n) : 1.0;
    if (y_scale_ < 1e-12) y_scale_ = 1.0;

    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = (y_[i] - y_mean_) / y_scale_;

    Mat k = kernel_matrix();
    const double noise = std::exp(log_noise_var);
    for (int i = 0; i < n; ++i) k(i, i) += noise;

    double jitter = 1e-12;
    for (int attempt = 0; attempt < 9; ++attempt) {
        Eigen::LLT<Mat> llt(k + jitter * Mat::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            chol_ = llt.matrixL();
            alpha_ = llt.solve(z);
            factorized_ = true;
            return;
        }
        jitter *= 10.0;
    }
    throw std::runtime_error("GP kernel matrix is not positive definite after max jitter");
}

double GpSurrogate::marginal_likelihood() const {
    const int n = size();
    Vec z(n);
    double mean = std::accumulate(y_.begin(), y_.end(), 0.0) / n;
    double var = 0.0;
    for (double y : y_) var += (y - mean) * (y - mean);
    double scale = n > 1 ? std::sqrt(var / n) : 1.0;
    if (scale < 1e-12) scale = 1.0;
    for (int i = 0; i < n; ++i) z[i] = (y_[i] - mean) / scale;

    Mat k = kernel_matrix();
    const double noise = std::exp(log_noise_var);
    for (int i = 0; i < n; ++i) k(i, i) += noise + 1e-10;
    Eigen::LLT<Mat> llt(k);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Mat l = llt.matrixL();
    const Vec alpha = llt.solve(z);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(l(i, i));
    return -0.5 * z.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

void GpSurrogate::fit_hyperparams(uint64_t seed, int restarts) {
    if (size() < 2) {
        factorize();
        return;
    }
    Rng rng(seed);
    Vec best_params;
    double best_ml = -std::numeric_limits<double>::infinity();

    auto pack = [&]() {
        Vec p(dim_ + 2);
        p.head(dim_) = log_lengthscales;
        p[dim_] = log_signal_var;
        p[dim_ + 1] = log_noise_var;
        return p;
    };
    auto unpack = [&](const Vec& p) {
        log_lengthscales = p.head(dim_);
        for (int i = 0; i < dim_; ++i)
            log_lengthscales[i] = std::clamp(log_lengthscales[i], kLogLsLo, kLogLsHi);
        log_signal_var = std::clamp(p[dim_], kLogSfLo, kLogSfHi);
        log_noise_var = std::clamp(p[dim_ + 1], kLogSnLo, kLogSnHi);
    };

    const Vec incumbent = pack();
    for (int r = 0; r < restarts; ++r) {
        Vec p(dim_ + 2);
        if (r == 0) {
            p = incumbent;  // keep the previous fit in the restart pool
        } else {
            for (int i = 0; i < dim_; ++i) p[i] = rng.uniform(kLogLsLo, kLogLsHi);
            p[dim_] = rng.uniform(-2.0, 2.0);
            p[dim_ + 1] = rng.uniform(kLogSnLo, kLogSnHi);
        }
        unpack(p);
        double current = marginal_likelihood();
        // Compass search in log space.
        double step = 0.5;
        while (step > 1e-3) {
            bool improved = false;
            for (int i = 0; i < dim_ + 2; ++i) {
                for (double sign : {1.0, -1.0}) {
                    Vec q = pack();
                    q[i] += sign * step;
                    unpack(q);
                    const double trial = marginal_likelihood();
                    if (trial > current + 1e-10) {
                        current = trial;
                        improved = true;
                    } else {
                        Vec back = q;
                        back[i] -= sign * step;
                        unpack(back);
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (current > best_ml) {
            best_ml = current;
            best_params = pack();
        }
    }
    unpack(best_params);
    factorize();
}

std::pair<Vec, Vec> GpSurrogate::predict(const Mat& queries) const {
    if (!factorized_) throw std::runtime_error("GP must be factorized before predicting");
    const int m = static_cast<int>(queries.rows());
    Vec means(m), vars(m);
    const double sf2 = std::exp(log_signal_var);
    for (int i = 0; i < m; ++i) {
        const Vec kq = kernel_column(queries.row(i).transpose());
        const Vec v = chol_.triangularView<Eigen::Lower>().solve(kq);
        const double mean_std = kq.dot(alpha_);
        const double var_std = std::max(sf2 - v.squaredNorm(), 0.0);
        means[i] = y_mean_ + y_scale_ * mean_std;
        vars[i] = y_scale_ * y_scale_ * var_std;
    }
    return {std::move(means), std::move(vars)};
}

std::pair<Vec, Vec> fit_predict(GpSurrogate& surrogate, const Mat& queries) {
    surrogate.factorize();
    return surrogate.predict(queries);
}

double expected_improvement(double mean, double variance, double incumbent) {
    const double sigma = std::sqrt(std::max(variance, 0.0));
    const double improvement = mean - incumbent;
    if (sigma < 1e-15) return std::max(improvement, 0.0);
    const double u = improvement / sigma;
    return improvement * normal_cdf(u) + sigma * normal_pdf(u);
}

Vec project_distinct(Vec gammas, double min_gap) {
    const int n = static_cast<int>(gammas.size());
    if (n < 2) return gammas;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return gammas[i] < gammas[j]; });
    // Push up to create gaps, then sweep down from the top to stay in [0,1].
    for (int i = 1; i < n; ++i) {
        if (gammas[order[i]] - gammas[order[i - 1]] < min_gap)
            gammas[order[i]] = gammas[order[i - 1]] + min_gap;
    }
    if (gammas[order[n - 1]] > 1.0) gammas[order[n - 1]] = 1.0;
    for (int i = n - 2; i >= 0; --i) {
        if (gammas[order[i + 1]] - gammas[order[i]] < min_gap)
            gammas[order[i]] = gammas[order[i + 1]] - min_gap;
    }
    for (int i = 0; i < n; ++i) gammas[i] = std::clamp(gammas[i], 0.0, 1.0);
    return gammas;
}

namespace {

double dynamic_floor(const std::vector<OuterRecord>& records) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& record : records) {
        if (record.failed) continue;
        lo = std::min(lo, record.score);
        hi = std::max(hi, record.score);
    }
    if (!std::isfinite(lo)) return -1e6;
    return lo - 3.0 * std::max(hi - lo, 1.0);
}

void append_record(OuterTrace& trace, int iteration, const Vec& gammas, double score,
                   bool failed) {
    OuterRecord record;
    record.iteration = iteration;
    record.gammas = gammas;
    record.failed = failed;
    record.score = score;
    if (!failed && (!trace.has_best() || score > trace.best_score)) {
        trace.best_score = score;
        trace.best_gammas = gammas;
    }
    record.best_so_far = trace.has_best() ? trace.best_score
                                          : -std::numeric_limits<double>::infinity();
    trace.records.push_back(std::move(record));
}

double evaluate_with_floor(const Objective& objective, const Vec& gammas,
                           const std::vector<OuterRecord>& records, bool& failed) {
    try {
        const double value = objective(gammas);
        if (std::isfinite(value)) {
            failed = false;
            return value;
        }
    } catch (const std::exception&) {
    }
    failed = true;
    return dynamic_floor(records);
}

}  // namespace

OuterTrace run_outer(const Objective& objective, int k, const OuterOptions& opts) {
    const int n_init = opts.n_init > 0 ? opts.n_init : 5 * k;
    if (opts.max_iter < n_init) throw ValidationError("max_iter must be at least n_init");
    Rng rng(opts.seed);
    OuterTrace trace;

    GpSurrogate surrogate(k);
    auto record_eval = [&](int iteration, const Vec& gammas) {
        bool failed = false;
        const double score = evaluate_with_floor(objective, gammas, trace.records, failed);
        append_record(trace, iteration, gammas, score, failed);
        surrogate.add_observation(gammas, score);
    };

    for (int i = 0; i < n_init; ++i) {
        Vec gammas(k);
        for (int d = 0; d < k; ++d) gammas[d] = rng.uniform();
        gammas = project_distinct(std::move(gammas), opts.distinct_gap);
        record_eval(i, gammas);
    }

    for (int iteration = n_init; iteration < opts.max_iter; ++iteration) {
        surrogate.fit_hyperparams(opts.seed * 1000003ULL + static_cast<uint64_t>(iteration));
        const double incumbent = surrogate.best_observed();

        // Multi-start EI maximization: quasi-random seeds, then compass
        // refinement of the best few.
        Mat starts(opts.acquisition_starts, k);
        for (int i = 0; i < opts.acquisition_starts; ++i) {
            const auto point = halton_point(static_cast<uint64_t>(iteration) *
                                                    opts.acquisition_starts + i + 1,
                                            k);
            for (int d = 0; d < k; ++d) starts(i, d) = point[d];
        }
        auto [means, vars] = surrogate.predict(starts);
        std::vector<int> order(opts.acquisition_starts);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return expected_improvement(means[a], vars[a], incumbent) >
                   expected_improvement(means[b], vars[b], incumbent);
        });

        auto ei_at = [&](const Vec& x) {
            Mat q(1, k);
            q.row(0) = x.transpose();
            auto [m, v] = surrogate.predict(q);
            return expected_improvement(m[0], v[0], incumbent);
        };

        Vec best_x = project_distinct(starts.row(order[0]).transpose(), opts.distinct_gap);
        double best_ei = ei_at(best_x);
        for (int c = 0; c < std::min(4, opts.acquisition_starts); ++c) {
            Vec x = project_distinct(starts.row(order[c]).transpose(), opts.distinct_gap);
            double current = ei_at(x);
            double step = 0.1;
            while (step > 1e-4) {
                bool improved = false;
                for (int d = 0; d < k; ++d) {
                    for (double sign : {1.0, -1.0}) {
                        Vec trial = x;
                        trial[d] = std::clamp(trial[d] + sign * step, 0.0, 1.0);
                        trial = project_distinct(std::move(trial), opts.distinct_gap);
                        const double value = ei_at(trial);
                        if (value > current + 1e-15) {
                            x = trial;
                            current = value;
                            improved = true;
                        }
                    }
                }
                if (!improved) step *= 0.5;
            }
            if (current > best_ei) {
                best_ei = current;
                best_x = x;
            }
        }
        record_eval(iteration, best_x);
    }
    return trace;
}

long grid_search_size(int k, double step) {
    const long per_axis = static_cast<long>(std::floor(1.0 / step + 0.5)) + 1;
    long total = 1;
    for (int i = 0; i < k; ++i) total *= per_axis;
    return total;
}

OuterTrace grid_search(const Objective& objective, int k, double step) {
    if (step <= 0.0) throw ValidationError("grid step must be positive");
    const int per_axis = static_cast<int>(std::floor(1.0 / step + 0.5)) + 1;
    OuterTrace trace;
    std::vector<int> idx(k, 0);
    int iteration = 0;
    while (true) {
        Vec gammas(k);
        for (int d = 0; d < k; ++d) gammas[d] = std::min(1.0, idx[d] * step);
        bool distinct = true;
        for (int i = 0; i < k && distinct; ++i)
            for (int j = i + 1; j < k; ++j)
                if (std::abs(gammas[i] - gammas[j]) < step / 2.0) distinct = false;
        if (distinct) {
            bool failed = false;
            const double score = evaluate_with_floor(objective, gammas, trace.records, failed);
            append_record(trace, iteration++, gammas, score, failed);
        }
        int pos = k - 1;
        while (pos >= 0 && ++idx[pos] >= per_axis) idx[pos--] = 0;
        if (pos < 0) break;
    }
    return trace;
}

std::string trace_csv(const OuterTrace& trace) {
    auto fmt = [](double value) {
        char buffer[40];
        std::snprintf(buffer, sizeof(buffer), "%.17g", value);
        return std::string(buffer);
    };
    std::string csv = "iteration";
    if (!trace.records.empty()) {
        for (int d = 1; d <= trace.records.front().gammas.size(); ++d)
            csv += ",gamma_" + std::to_string(d);
    }
    csv += ",score,best_so_far\n";
    for (const auto& record : trace.records) {
        csv += std::to_string(record.iteration);
        for (int d = 0; d < record.gammas.size(); ++d) csv += "," + fmt(record.gammas[d]);
        csv += "," + fmt(record.score) + "," + fmt(record.best_so_far) + "\n";
    }
    return csv;
}

}  // namespace mpirl
