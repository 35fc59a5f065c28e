#include "bmc/laplace.hpp"

#include <cmath>
#include <stdexcept>

namespace bmc {

double LaplaceToolkit::s0(double rho, double tol) const {
    if (rho <= 0.0) throw std::invalid_argument("s0 needs rho > 0");
    auto ok = [&](double s) { return R(s) <= rho * s; };
    double hi = 1.0 / rho;  // rho * s <= 1 caps the search
    if (ok(hi)) return hi;
    double lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

double LaplaceToolkit::remainder_integral(double lo, double C, double tol) const {
    if (!(lo >= 0.0 && C > lo)) throw std::invalid_argument("bad remainder integral bounds");
    auto f = [this](double s) {
        if (s <= 0.0) return 0.0;
        return R(s) / (s * s);
    };
    return integrate(f, lo, C, tol);
}

LaplaceToolkit::DichotomyScan LaplaceToolkit::llogl_dichotomy(double C, int rungs) const {
    DichotomyScan scan;
    double value = 0.0;
    double hi = C;
    // ladder lo = C * 4^-j; increments are int_{lo_j}^{lo_{j-1}}
    std::vector<double> increments;
    for (int j = 1; j <= rungs; ++j) {
        double lo = C * std::pow(4.0, -j);
        double inc = remainder_integral(lo, hi, 1e-11);
        increments.push_back(inc);
        value += inc;
        scan.lower_limits.push_back(lo);
        scan.values.push_back(value);
        hi = lo;
    }
    // Convergent integrands have geometrically shrinking increments on this
    // ladder (ratio -> 1/4 or faster); a k log k divergence makes the
    // increments shrink only harmonically, with ratios tending to 1.
    double r1 = increments[increments.size() - 2];
    double r2 = increments.back();
    scan.divergent = r1 > 0.0 && r2 > 0.6 * r1;
    return scan;
}

}  // namespace bmc
