#include "mpirl/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mpirl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kPhase1Tol = 1e-7;
constexpr double kRatioSlack = 1e-7;
constexpr int kRefactorEvery = 64;

/// Simplex on  max q.y  s.t.  F y = h, y >= 0  with an explicit tableau that
/// is periodically rebuilt from the original data. Pivoting on near-singular
/// geometry (resolvents at gamma ~ 1 produce constraint rows that differ at
/// the 1e-6 scale) corrupts an incrementally updated tableau badly enough to
/// yield false optimality certificates, so claimed optima are re-verified on
/// a freshly factorized tableau before being believed. The ratio test is a
/// two-pass Harris variant: among rows within a small slack of the minimal
/// ratio it picks the largest pivot element.
class Tableau {
  public:
    Tableau(Mat f, Vec h, std::vector<int> basis)
        : f_(std::move(f)), h_(std::move(h)), basis_(std::move(basis)) {
        rows_ = static_cast<int>(f_.rows());
        cols_ = static_cast<int>(f_.cols());
        q_ = Vec::Zero(cols_);
    }

    void set_objective(const Vec& q) { q_ = q; }

    int rows() const { return rows_; }
    int basis(int row) const { return basis_[row]; }
    double objective() const { return t_(rows_, cols_); }
    double rhs(int row) const { return t_(row, cols_); }

    void refactorize() {
        Mat b(rows_, rows_);
        Vec cb(rows_);
        for (int r = 0; r < rows_; ++r) {
            b.col(r) = f_.col(basis_[r]);
            cb[r] = q_[basis_[r]];
        }
        Eigen::PartialPivLU<Mat> lu(b);
        t_ = Mat(rows_ + 1, cols_ + 1);
        t_.topLeftCorner(rows_, cols_) = lu.solve(f_);
        t_.col(cols_).head(rows_) = lu.solve(h_);
        const Vec duals = lu.transpose().solve(cb);
        t_.row(rows_).head(cols_) = (f_.transpose() * duals - q_).transpose();
        t_(rows_, cols_) = duals.dot(h_);
        // Basic columns are canonical by construction up to roundoff.
        for (int r = 0; r < rows_; ++r) t_(rows_, basis_[r]) = 0.0;
    }

    enum class StepResult { Optimal, Unbounded, Pivoted };

    StepResult step() {
        int enter = -1;
        double best_cost = -kCostTol;
        for (int j = 0; j < cols_; ++j) {
            if (blocked_[j]) continue;
            const double reduced = t_(rows_, j);
            if (reduced < best_cost) {
                best_cost = reduced;
                enter = j;
            }
        }
        if (enter < 0) return StepResult::Optimal;

        // Pass 1: minimal ratio. Pass 2: among rows within slack of it,
        // the largest pivot (ties to the smallest basis index).
        double min_ratio = kInf;
        for (int r = 0; r < rows_; ++r) {
            const double a = t_(r, enter);
            if (a > kPivotTol) min_ratio = std::min(min_ratio, t_(r, cols_) / a);
        }
        if (!std::isfinite(min_ratio)) return StepResult::Unbounded;
        int leave = -1;
        double best_pivot = 0.0;
        const double cutoff = min_ratio + kRatioSlack * (1.0 + std::abs(min_ratio));
        for (int r = 0; r < rows_; ++r) {
            const double a = t_(r, enter);
            if (a <= kPivotTol) continue;
            if (t_(r, cols_) / a > cutoff) continue;
            if (a > best_pivot * (1.0 + 1e-12) ||
                (a > best_pivot * (1.0 - 1e-12) && leave >= 0 && basis_[r] < basis_[leave])) {
                best_pivot = a;
                leave = r;
            }
        }
        if (leave < 0) return StepResult::Unbounded;
        pivot(leave, enter);
        return StepResult::Pivoted;
    }

    /// Runs pivots with periodic refactorization; every claimed optimum or
    /// unbounded ray is re-verified on a fresh factorization.
    StepResult optimize() {
        const long max_pivots = 5000L + 200L * static_cast<long>(rows_ + cols_);
        long pivots = 0;
        int since_refactor = 0;
        refactorize();
        while (pivots < max_pivots) {
            const StepResult result = step();
            if (result == StepResult::Pivoted) {
                ++pivots;
                if (++since_refactor >= kRefactorEvery) {
                    refactorize();
                    since_refactor = 0;
                }
                continue;
            }
            if (since_refactor == 0) return result;
            refactorize();
            since_refactor = 0;
        }
        throw LpError("simplex exceeded its pivot budget (possible cycling)");
    }

    void pivot(int row, int col) {
        basis_[row] = col;
        t_.row(row) /= t_(row, col);
        for (int r = 0; r <= rows_; ++r) {
            if (r != row && t_(r, col) != 0.0) t_.row(r) -= t_(r, col) * t_.row(row);
        }
    }

    void block_column(int col) {
        if (blocked_.empty()) blocked_.assign(cols_, 0);
        blocked_[col] = 1;
    }

    void init_blocked() { blocked_.assign(cols_, 0); }

    /// Pivot a basic artificial out on any real column; returns false when
    /// the row is redundant (all-zero over real columns).
    bool pivot_out(int row, int real_cols) {
        for (int j = 0; j < real_cols; ++j) {
            if (std::abs(t_(row, j)) > 1e-7) {
                pivot(row, j);
                return true;
            }
        }
        return false;
    }

    /// Drop rows (by index, ascending) from the master data.
    void drop_rows(const std::vector<int>& rows_to_drop) {
        if (rows_to_drop.empty()) return;
        std::vector<char> drop(rows_, 0);
        for (int r : rows_to_drop) drop[r] = 1;
        const int kept = rows_ - static_cast<int>(rows_to_drop.size());
        Mat f(kept, cols_);
        Vec h(kept);
        std::vector<int> basis;
        basis.reserve(kept);
        int at = 0;
        for (int r = 0; r < rows_; ++r) {
            if (drop[r]) continue;
            f.row(at) = f_.row(r);
            h[at] = h_[r];
            basis.push_back(basis_[r]);
            ++at;
        }
        f_ = std::move(f);
        h_ = std::move(h);
        basis_ = std::move(basis);
        rows_ = kept;
    }

  private:
    Mat f_;
    Vec h_;
    std::vector<int> basis_;
    Vec q_;
    Mat t_;
    std::vector<char> blocked_;
    int rows_ = 0, cols_ = 0;
};

}  // namespace

void LpProblem::check_shapes() const {
    const int n = n_vars();
    auto bad = [&](bool cond, const char* what) {
        if (cond) throw LpError(std::string("malformed LP: ") + what);
    };
    bad(A.rows() != b.size(), "A/b row mismatch");
    bad(A.size() > 0 && A.cols() != n, "A column mismatch");
    bad(E.rows() != f.size(), "E/f row mismatch");
    bad(E.size() > 0 && E.cols() != n, "E column mismatch");
    bad(lo.size() != n || hi.size() != n, "bound vector mismatch");
    for (int j = 0; j < n; ++j) bad(lo[j] > hi[j], "lo > hi");
}

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

LpSolution solve_lp(const LpProblem& problem) {
    problem.check_shapes();
    const int n = problem.n_vars();

    // Variable substitutions onto y >= 0.
    //   lo finite:            x = lo + y          (two-sided adds a row)
    //   lo = -inf, hi finite: x = hi - y
    //   free:                 x = y+ - y-
    struct VarMap {
        int col = -1;
        int neg_col = -1;
        double base = 0.0;
        double sign = 1.0;
    };
    std::vector<VarMap> vmap(n);
    int y_count = 0;
    for (int j = 0; j < n; ++j) {
        VarMap& m = vmap[j];
        if (std::isfinite(problem.lo[j])) {
            m.base = problem.lo[j];
            m.col = y_count++;
        } else if (std::isfinite(problem.hi[j])) {
            m.base = problem.hi[j];
            m.sign = -1.0;
            m.col = y_count++;
        } else {
            m.col = y_count++;
            m.neg_col = y_count++;
        }
    }

    int bound_rows = 0;
    for (int j = 0; j < n; ++j)
        if (std::isfinite(problem.lo[j]) && std::isfinite(problem.hi[j])) ++bound_rows;
    const int m_ineq = static_cast<int>(problem.A.rows());
    const int m_eq = static_cast<int>(problem.E.rows());
    const int m_total = m_ineq + bound_rows + m_eq;

    Mat rowsy = Mat::Zero(m_total, y_count);
    Vec rhs = Vec::Zero(m_total);
    std::vector<char> needs_artificial(m_total, 0);

    auto emit = [&](int row, const Eigen::Ref<const Vec>& coeffs, double b_val) {
        double shift = 0.0;
        for (int j = 0; j < n; ++j) {
            const VarMap& m = vmap[j];
            const double c = coeffs[j];
            if (c == 0.0) continue;
            shift += c * m.base;
            rowsy(row, m.col) += c * m.sign;
            if (m.neg_col >= 0) rowsy(row, m.neg_col) -= c;
        }
        rhs[row] = b_val - shift;
    };

    int row = 0;
    for (int i = 0; i < m_ineq; ++i, ++row) emit(row, problem.A.row(i).transpose(), problem.b[i]);
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(problem.lo[j]) && std::isfinite(problem.hi[j])) {
            rowsy(row, vmap[j].col) = 1.0;
            rhs[row] = problem.hi[j] - problem.lo[j];
            ++row;
        }
    }
    for (int i = 0; i < m_eq; ++i, ++row) {
        emit(row, problem.E.row(i).transpose(), problem.f[i]);
        needs_artificial[row] = 1;
    }

    Vec cost_y = Vec::Zero(y_count);
    double cost_offset = 0.0;
    for (int j = 0; j < n; ++j) {
        const VarMap& m = vmap[j];
        const double c = problem.objective[j];
        cost_offset += c * m.base;
        cost_y[m.col] += c * m.sign;
        if (m.neg_col >= 0) cost_y[m.neg_col] -= c;
    }

    // Inequality rows with negative rhs become >=-rows after negation and
    // need a surplus column plus an artificial.
    const int n_slack_rows = m_ineq + bound_rows;
    int surplus_count = 0;
    for (int r = 0; r < n_slack_rows; ++r) {
        if (rhs[r] < 0.0) {
            rowsy.row(r) = -rowsy.row(r);
            rhs[r] = -rhs[r];
            needs_artificial[r] = 1;
            ++surplus_count;
        }
    }
    for (int r = n_slack_rows; r < m_total; ++r) {
        if (rhs[r] < 0.0) {
            rowsy.row(r) = -rowsy.row(r);
            rhs[r] = -rhs[r];
        }
    }

    int art_count = 0;
    for (int r = 0; r < m_total; ++r) art_count += needs_artificial[r] ? 1 : 0;
    const int slack_count = n_slack_rows;

    const int real_cols = y_count + slack_count + surplus_count;
    const int total_cols = real_cols + art_count;
    Mat full = Mat::Zero(m_total, total_cols);
    full.leftCols(y_count) = rowsy;

    std::vector<int> initial_basis(m_total, -1);
    std::vector<int> art_cols;
    int surplus_at = y_count + slack_count;
    int art_at = real_cols;
    for (int r = 0; r < m_total; ++r) {
        if (r < n_slack_rows) {
            // Slack (or surplus for flipped rows) column.
            const double sign = needs_artificial[r] ? -1.0 : 1.0;
            const int col = needs_artificial[r] ? surplus_at++ : y_count + r;
            full(r, col) = sign;
            if (!needs_artificial[r]) initial_basis[r] = col;
        }
        if (needs_artificial[r]) {
            full(r, art_at) = 1.0;
            initial_basis[r] = art_at;
            art_cols.push_back(art_at);
            ++art_at;
        }
    }

    Tableau tab(full, rhs, initial_basis);
    tab.init_blocked();

    if (!art_cols.empty()) {
        Vec phase1 = Vec::Zero(total_cols);
        for (int c : art_cols) phase1[c] = -1.0;
        tab.set_objective(phase1);
        const auto phase1_result = tab.optimize();
        if (phase1_result == Tableau::StepResult::Unbounded)
            throw LpError("phase 1 reported unbounded, which cannot happen");
        if (tab.objective() < -kPhase1Tol) return {LpStatus::Infeasible, Vec::Zero(n), 0.0};

        std::vector<int> redundant;
        for (int r = 0; r < tab.rows(); ++r) {
            bool is_art = false;
            for (int c : art_cols)
                if (c == tab.basis(r)) is_art = true;
            if (is_art && !tab.pivot_out(r, real_cols)) redundant.push_back(r);
        }
        tab.drop_rows(redundant);
        for (int c : art_cols) tab.block_column(c);
    }

    Vec phase2 = Vec::Zero(total_cols);
    phase2.head(y_count) = cost_y;
    tab.set_objective(phase2);
    if (tab.optimize() == Tableau::StepResult::Unbounded)
        return {LpStatus::Unbounded, Vec::Zero(n), kInf};

    tab.refactorize();
    Vec y = Vec::Zero(total_cols);
    for (int r = 0; r < tab.rows(); ++r) {
        if (tab.basis(r) >= 0) y[tab.basis(r)] = tab.rhs(r);
    }
    Vec x(n);
    for (int j = 0; j < n; ++j) {
        const VarMap& m = vmap[j];
        double value = m.base + m.sign * y[m.col];
        if (m.neg_col >= 0) value -= y[m.neg_col];
        x[j] = value;
    }
    return {LpStatus::Optimal, std::move(x), tab.objective() + cost_offset};
}

}  // namespace mpirl
