#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bmc/rng.hpp"

namespace bmc {

// Exact samplers for the standard distributions the simulator composes.
// All of them consume draws from a caller-supplied Rng stream only, so a
// (seed, counter) pair fully determines every sample. Large-count compound
// steps rely on negative_binomial/binomial staying exact for n up to 1e9.

/// Standard normal via the Marsaglia polar method (the spare is discarded).
inline double normal(Rng& rng) {
    for (;;) {
        double u = 2.0 * rng.u01() - 1.0;
        double v = 2.0 * rng.u01() - 1.0;
        double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Gamma(shape, scale=1), Marsaglia–Tsang squeeze method.
inline double gamma_shape(Rng& rng, double shape) {
    if (shape < 1.0) {
        double g = gamma_shape(rng, shape + 1.0);
        return g * std::pow(rng.u01(), 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal(rng);
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = rng.u01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

/// Poisson(lambda): product inversion for small lambda, PTRS rejection
/// (Hormann 1993) for large.
inline std::int64_t poisson(Rng& rng, double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 10.0) {
        double limit = std::exp(-lambda);
        double prod = rng.u01();
        std::int64_t k = 0;
        while (prod > limit) {
            prod *= rng.u01();
            ++k;
        }
        return k;
    }
    double slam = std::sqrt(lambda);
    double loglam = std::log(lambda);
    double b = 0.931 + 2.53 * slam;
    double a = -0.059 + 0.02483 * b;
    double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        double u = rng.u01() - 0.5;
        double v = rng.u01();
        double us = 0.5 - std::fabs(u);
        double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            kf * loglam - lambda - std::lgamma(kf + 1.0)) {
            return static_cast<std::int64_t>(kf);
        }
    }
}

/// Binomial(n, p), exact for any n. Inversion when n*min(p,1-p) is small,
/// BTRS rejection (Hormann 1992) otherwise.
inline std::int64_t binomial(Rng& rng, std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    bool flipped = p > 0.5;
    double q = flipped ? 1.0 - p : p;
    double np = static_cast<double>(n) * q;
    std::int64_t k;
    if (np < 30.0) {
        // BINV with the survival factor kept in log space.
        double s = q / (1.0 - q);
        double base = std::exp(static_cast<double>(n) * std::log1p(-q));
        for (;;) {
            double u = rng.u01();
            double prob = base;
            k = 0;
            bool ok = false;
            while (k <= n) {
                if (u <= prob) { ok = true; break; }
                u -= prob;
                prob *= s * static_cast<double>(n - k) / static_cast<double>(k + 1);
                ++k;
            }
            if (ok) break;
        }
    } else {
        double spq = std::sqrt(np * (1.0 - q));
        double b = 1.15 + 2.53 * spq;
        double a = -0.0873 + 0.0248 * b + 0.01 * q;
        double c = np + 0.5;
        double vr = 0.92 - 4.2 / b;
        double alpha = (2.83 + 5.1 / b) * spq;
        double lpq = std::log(q / (1.0 - q));
        double m = std::floor((static_cast<double>(n) + 1.0) * q);
        double h = std::lgamma(m + 1.0) + std::lgamma(static_cast<double>(n) - m + 1.0);
        for (;;) {
            double u = rng.u01() - 0.5;
            double v = rng.u01();
            double us = 0.5 - std::fabs(u);
            double kf = std::floor((2.0 * a / us + b) * u + c);
            if (kf < 0.0 || kf > static_cast<double>(n)) continue;
            if (us >= 0.07 && v <= vr) { k = static_cast<std::int64_t>(kf); break; }
            if (std::log(v * alpha / (a / (us * us) + b)) <=
                h - std::lgamma(kf + 1.0) - std::lgamma(static_cast<double>(n) - kf + 1.0) +
                    (kf - m) * lpq) {
                k = static_cast<std::int64_t>(kf);
                break;
            }
        }
    }
    return flipped ? n - k : k;
}

/// Negative binomial: number of failures before the r-th success, success
/// probability p. Exact via the Gamma-Poisson mixture, valid for huge r.
inline std::int64_t negative_binomial(Rng& rng, double r, double p) {
    if (r <= 0.0) return 0;
    double lambda = gamma_shape(rng, r) * (1.0 - p) / p;
    return poisson(rng, lambda);
}

/// Shifted geometric on {1,2,...} with pmf (1-q)^{k-1} q.
inline std::int64_t geometric_shifted(Rng& rng, double q) {
    if (q >= 1.0) return 1;
    if (q <= 0.0) throw std::invalid_argument("geometric parameter must be in (0,1]");
    double u = rng.u01();
    return 1 + static_cast<std::int64_t>(std::floor(std::log(u) / std::log1p(-q)));
}

/// Walker/Vose alias table: O(1) sampling from a fixed finite distribution.
struct AliasTable {
    std::vector<double> prob;
    std::vector<std::uint32_t> alias;

    static AliasTable build(const std::vector<double>& weights) {
        AliasTable t;
        std::size_t n = weights.size();
        t.prob.assign(n, 0.0);
        t.alias.assign(n, 0);
        double total = 0.0;
        for (double w : weights) total += w;
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            std::uint32_t s = small.back();
            small.pop_back();
            std::uint32_t l = large.back();
            t.prob[s] = scaled[s];
            t.alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::uint32_t i : large) t.prob[i] = 1.0;
        for (std::uint32_t i : small) t.prob[i] = 1.0;
        return t;
    }

    std::size_t sample(Rng& rng) const {
        std::size_t i = static_cast<std::size_t>(rng.below(prob.size()));
        return rng.u01() < prob[i] ? i : alias[i];
    }
};

}  // namespace bmc
