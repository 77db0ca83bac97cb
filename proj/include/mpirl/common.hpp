#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mpirl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Discount factors of exactly 1 are clamped here so that every resolvent
/// (I - gamma*T) stays invertible. Figure-style sweeps over [0,1] rely on it.
inline constexpr double kGammaCap = 0.999999;

inline double cap_gamma(double gamma) {
    if (gamma < 0.0 || gamma > 1.0) {
        throw std::invalid_argument("discount factor must lie in [0, 1], got " +
                                    std::to_string(gamma));
    }
    return gamma >= 1.0 ? kGammaCap : gamma;
}

/// Iterative solver failed to reach its residual target.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

  private:
    double residual_;
};

/// Two expert policies are indistinguishable, so no reward can separate them.
class AssumptionViolation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// LP backend hit a numerical failure (distinct from an infeasible problem).
class LpError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The inner IRL problem has no solution under the queried discount factors.
class InfeasibleGamma : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace mpirl
