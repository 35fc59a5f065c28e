#include <doctest.h>

#include <cmath>
#include <vector>

#include "bmc/numeric.hpp"
#include "bmc/rng.hpp"
#include "bmc/sampling.hpp"

using namespace bmc;

TEST_CASE("counter rng is reproducible and position independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    // jumping: output i is a pure function of (key, i)
    Rng c(42);
    c.ctr = 49;
    CHECK(c.next() == Rng::mix64(42 + 50 * Rng::kGamma));
}

TEST_CASE("substreams differ from each other and the parent") {
    Rng parent(7);
    Rng s0 = Rng::substream(7, 0);
    Rng s1 = Rng::substream(7, 1);
    CHECK(s0.key != s1.key);
    CHECK(s0.key != parent.key);
    Rng s0b = Rng::substream(7, 0);
    CHECK(s0.key == s0b.key);
}

TEST_CASE("u01 lies in (0,1)") {
    Rng r(3);
    for (int i = 0; i < 10000; ++i) {
        double u = r.u01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("below is unbiased across small ranges") {
    Rng r(11);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[r.below(7)]++;
    for (int c : counts) {
        double expect = n / 7.0;
        CHECK(std::fabs(c - expect) < 4.0 * std::sqrt(expect));
    }
}

TEST_CASE("geometric sampler matches the shifted-geometric pmf") {
    Rng r(5);
    const int n = 100000;
    std::vector<int> counts(12, 0);
    for (int i = 0; i < n; ++i) {
        auto k = geometric_shifted(r, 0.5);
        counts[static_cast<std::size_t>(std::min<std::int64_t>(k, 11))]++;
    }
    double stat = 0.0;
    for (int k = 1; k <= 10; ++k) {
        double p = std::pow(0.5, k);
        double e = n * p;
        stat += (counts[k] - e) * (counts[k] - e) / e;
    }
    double e_tail = n * std::pow(0.5, 10);
    stat += (counts[11] - e_tail) * (counts[11] - e_tail) / e_tail;
    CHECK(chi_square_pvalue(stat, 10) > 0.01);
}

TEST_CASE("binomial matches exact pmf for small n and moments for large n") {
    Rng r(9);
    // chi-square vs Binomial(8, 0.3)
    const int n = 60000;
    std::vector<int> counts(9, 0);
    for (int i = 0; i < n; ++i) counts[binomial(r, 8, 0.3)]++;
    double stat = 0.0;
    for (int k = 0; k <= 8; ++k) {
        double p = 1.0;
        for (int j = 0; j < k; ++j) p *= (8.0 - j) / (j + 1.0);
        p *= std::pow(0.3, k) * std::pow(0.7, 8 - k);
        double e = n * p;
        stat += (counts[k] - e) * (counts[k] - e) / e;
    }
    CHECK(chi_square_pvalue(stat, 8) > 0.01);

    // large n moments
    const std::int64_t big = 2000000;
    double mean = 0.0, m2 = 0.0;
    const int reps = 3000;
    for (int i = 0; i < reps; ++i) {
        double x = static_cast<double>(binomial(r, big, 0.25));
        mean += x;
        m2 += x * x;
    }
    mean /= reps;
    m2 = m2 / reps - mean * mean;
    double want_mean = big * 0.25;
    double want_var = big * 0.25 * 0.75;
    CHECK(std::fabs(mean - want_mean) < 4.0 * std::sqrt(want_var / reps));
    CHECK(std::fabs(m2 - want_var) < 0.1 * want_var);
}

TEST_CASE("negative binomial via gamma-poisson matches exact pmf") {
    Rng r(13);
    const int n = 60000;
    std::vector<int> counts(16, 0);
    for (int i = 0; i < n; ++i)
        counts[static_cast<std::size_t>(std::min<std::int64_t>(negative_binomial(r, 3.0, 0.5), 15))]++;
    // NB(3, 1/2): P(k) = C(k+2,2) (1/2)^{3+k}
    double stat = 0.0;
    int dof = 0;
    double tailp = 1.0;
    for (int k = 0; k <= 14; ++k) {
        double p = (k + 2.0) * (k + 1.0) / 2.0 * std::pow(0.5, k + 3);
        tailp -= p;
        double e = n * p;
        if (e < 8) break;
        stat += (counts[k] - e) * (counts[k] - e) / e;
        ++dof;
    }
    CHECK(chi_square_pvalue(stat, dof) > 0.01);

    // huge r sanity: mean of NB(r,1/2) is r
    double x = static_cast<double>(negative_binomial(r, 1e8, 0.5));
    CHECK(std::fabs(x - 1e8) < 6.0 * std::sqrt(2.0 * 1e8));
}

TEST_CASE("poisson sampler moments") {
    Rng r(17);
    for (double lam : {3.0, 40.0}) {
        double mean = 0.0;
        const int reps = 40000;
        for (int i = 0; i < reps; ++i) mean += static_cast<double>(poisson(r, lam));
        mean /= reps;
        CHECK(std::fabs(mean - lam) < 4.0 * std::sqrt(lam / reps));
    }
}
