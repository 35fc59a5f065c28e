#pragma once

#include <cmath>
#include <functional>

namespace bmc {

/// psi(t) = e^{-t} - 1 + t, evaluated without cancellation.
inline double psi(double t) { return std::expm1(-t) + t; }

/// Adaptive Simpson quadrature on [a,b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12, int max_depth = 40);

/// Regularized upper incomplete gamma Q(a,x); used for chi-square p-values.
double gamma_q(double a, double x);

/// Chi-square upper tail p-value with k degrees of freedom.
inline double chi_square_pvalue(double stat, int dof) {
    return gamma_q(0.5 * dof, 0.5 * stat);
}

}  // namespace bmc
