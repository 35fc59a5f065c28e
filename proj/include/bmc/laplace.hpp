#pragma once

#include "bmc/numeric.hpp"
#include "bmc/offspring.hpp"

namespace bmc {

/// Laplace-transform toolkit bound to one offspring pmf theta:
///   G(s) = E e^{-sX}
///   R(s) = G(s) - 1 + mean * s = E psi(sX) >= 0
/// plus the threshold s0 = largest s with R(s) <= rho*s and rho*s <= 1,
/// located by bisection (R(s)/s is non-decreasing, so the predicate is an
/// interval around 0), and the integral I(eps) = int_eps^C R(s)/s^2 ds whose
/// eps -> 0 behaviour separates finite from infinite k log k mass.
class LaplaceToolkit {
public:
    explicit LaplaceToolkit(OffspringPMF theta) : theta_(std::move(theta)) {}

    const OffspringPMF& theta() const { return theta_; }
    double G(double s) const { return theta_.laplace(s); }
    double R(double s) const { return theta_.remainder(s); }

    /// s0 for a given branching ratio rho, bisected to `tol`.
    double s0(double rho, double tol = 1e-9) const;

    /// int_lo^C R(s)/s^2 ds by adaptive quadrature.
    double remainder_integral(double lo, double C, double tol = 1e-10) const;

    struct DichotomyScan {
        std::vector<double> lower_limits;
        std::vector<double> values;
        bool divergent = false;  // increments keep growing as lo -> 0
    };
    /// Evaluates I(eps) over a shrinking ladder of lower limits and flags
    /// divergence when the increments fail to decay.
    DichotomyScan llogl_dichotomy(double C = 1.0, int rungs = 7) const;

private:
    OffspringPMF theta_;
};

}  // namespace bmc
