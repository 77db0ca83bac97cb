#pragma once

#include <string>

#include "mpirl/common.hpp"

namespace mpirl {

/// maximize objective . x
/// subject to A x <= b, E x = f, lo <= x <= hi (coordinates may be +-inf).
struct LpProblem {
    Vec objective;
    Mat A;
    Vec b;
    Mat E;
    Vec f;
    Vec lo;
    Vec hi;

    int n_vars() const { return static_cast<int>(objective.size()); }
    void check_shapes() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vec x;
    double objective_value = 0.0;
};

/// Dense two-phase simplex with a Dantzig rule and a Bland fallback for
/// anti-cycling. Deterministic for a fixed problem. Throws LpError on
/// numerical failure, which is distinct from an Infeasible status.
LpSolution solve_lp(const LpProblem& problem);

}  // namespace mpirl
