#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "bmc/numeric.hpp"
#include "bmc/offspring.hpp"
#include "bmc/rng.hpp"

using namespace bmc;

TEST_CASE("delta moments") {
    auto d2 = OffspringPMF::delta(2);
    CHECK(d2.mean() == 2.0);
    auto ll = d2.llogl();
    CHECK(!ll.divergent);
    CHECK(ll.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("geometric moments against a direct series oracle") {
    auto g = OffspringPMF::geometric(0.5);
    CHECK(g.mean() == doctest::Approx(2.0).epsilon(1e-14));

    // oracle: direct summation with a geometric tail bound
    double oracle = 0.0;
    double w = 0.5;
    for (int k = 1; k < 400; ++k) {
        oracle += w * k * std::log(static_cast<double>(k));
        w *= 0.5;
    }
    auto ll = g.llogl();
    CHECK(!ll.divergent);
    CHECK(ll.value == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("heavy tail: finite mean, divergent k log k") {
    auto h = OffspringPMF::heavy_tail(2.0, 2);
    CHECK(h.mean() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(h.llogl().divergent);
    // mass balance: atom + tail mass above 2 accounts for everything
    CHECK(h.pmf(1) + h.tail(2) == doctest::Approx(1.0).epsilon(1e-12));
    // comparison oracle: successive octave blocks of k ln k mass barely
    // decay (a summable series has geometrically vanishing blocks)
    double b1 = 0.0, b2 = 0.0;
    for (std::int64_t k = 1 << 8; k < (1 << 12); ++k)
        b1 += h.pmf(k) * k * std::log(static_cast<double>(k));
    for (std::int64_t k = 1 << 12; k < (1 << 16); ++k)
        b2 += h.pmf(k) * k * std::log(static_cast<double>(k));
    CHECK(b2 > 0.5 * b1);
    auto g = OffspringPMF::geometric(0.5);
    double g1 = 0.0, g2 = 0.0;
    for (std::int64_t k = 1 << 4; k < (1 << 6); ++k)
        g1 += g.pmf(k) * k * std::log(static_cast<double>(k));
    for (std::int64_t k = 1 << 6; k < (1 << 8); ++k)
        g2 += g.pmf(k) * k * std::log(static_cast<double>(k));
    CHECK(g2 < 0.01 * g1);
}

TEST_CASE("pmf normalisation within 1e-12") {
    auto e = OffspringPMF::explicit_pmf({{1, 0.25}, {3, 0.5}, {7, 0.25}});
    double s = 0.0;
    for (std::int64_t k = 1; k <= 7; ++k) s += e.pmf(k);
    CHECK(std::fabs(s - 1.0) < 1e-12);
    CHECK_THROWS_AS(OffspringPMF::explicit_pmf({{1, 0.5}, {2, 0.499}}), std::invalid_argument);
    CHECK_THROWS_AS(OffspringPMF::explicit_pmf({{0, 0.5}, {2, 0.5}}), std::invalid_argument);
}

TEST_CASE("domination examples") {
    auto d2 = OffspringPMF::delta(2), d3 = OffspringPMF::delta(3), d1 = OffspringPMF::delta(1);
    auto g = OffspringPMF::geometric(0.5);
    CHECK(d3.dominates(d2));
    CHECK(!d2.dominates(d3));
    CHECK(g.dominates(d1));
    CHECK(!d1.dominates(g));
    CHECK(OffspringPMF::geometric(1.0 / 3).dominates(g));
    CHECK(!g.dominates(OffspringPMF::geometric(1.0 / 3)));
    auto h = OffspringPMF::heavy_tail(2.0, 2);
    CHECK(!g.dominates(h));
}

TEST_CASE("domination is a partial order on random explicit pmfs") {
    Rng r(31);
    auto random_pmf = [&] {
        int n = static_cast<int>(r.below(4)) + 2;
        std::vector<std::pair<std::int64_t, double>> entries;
        double left = 1.0;
        for (int i = 0; i < n - 1; ++i) {
            double p = left * (0.2 + 0.6 * r.u01());
            entries.emplace_back(i + 1, p);
            left -= p;
        }
        entries.emplace_back(n, left);
        return OffspringPMF::explicit_pmf(entries);
    };
    std::vector<OffspringPMF> pmfs;
    for (int i = 0; i < 12; ++i) pmfs.push_back(random_pmf());
    for (const auto& a : pmfs) CHECK(a.dominates(a));  // reflexive
    for (const auto& a : pmfs)
        for (const auto& b : pmfs) {
            if (a.dominates(b) && b.dominates(a)) {
                for (std::int64_t n = 1; n <= 8; ++n)
                    CHECK(a.tail(n) == doctest::Approx(b.tail(n)).epsilon(1e-12));  // antisymmetric
            }
            for (const auto& c : pmfs)
                if (a.dominates(b) && b.dominates(c)) CHECK(a.dominates(c));  // transitive
        }
}

TEST_CASE("envelope of deltas is the largest delta") {
    auto env = envelope({OffspringPMF::delta(2), OffspringPMF::delta(3)});
    REQUIRE(env.ok);
    CHECK(env.pmf.kind() == OffspringPMF::Kind::delta);
    CHECK(env.pmf.delta_k() == 3);
    CHECK(!env.llogl.divergent);
}

TEST_CASE("envelope of geometrics keeps the fatter tail") {
    auto env = envelope({OffspringPMF::geometric(0.5), OffspringPMF::geometric(1.0 / 3)});
    REQUIRE(env.ok);
    CHECK(env.pmf.kind() == OffspringPMF::Kind::geometric);
    CHECK(env.pmf.geometric_q() == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(!env.llogl.divergent);
    for (const auto& member : {OffspringPMF::geometric(0.5), OffspringPMF::geometric(1.0 / 3)})
        CHECK(env.pmf.dominates(member));
}

TEST_CASE("mixed envelope is a genuine composite dominating everything") {
    std::vector<OffspringPMF> fam = {OffspringPMF::explicit_pmf({{1, 0.1}, {5, 0.9}}),
                                     OffspringPMF::geometric(0.5)};
    auto env = envelope(fam);
    REQUIRE(env.ok);
    for (const auto& m : fam) CHECK(env.pmf.dominates(m));
    // still a pmf
    double s = 0.0;
    for (std::int64_t k = 1; k <= 64; ++k) s += env.pmf.pmf(k);
    CHECK(s + env.pmf.tail(65) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(!env.llogl.divergent);
}

TEST_CASE("envelope failure on unbounded means") {
    std::vector<OffspringPMF> fam;
    for (int j = 1; j <= 41; ++j) fam.push_back(OffspringPMF::delta(std::int64_t(1) << j));
    auto env = envelope(fam);
    CHECK(!env.ok);
    CHECK(env.failure.find("not summable") != std::string::npos);
}

TEST_CASE("heavy envelope flags divergent llogl") {
    auto env = envelope({OffspringPMF::geometric(0.5), OffspringPMF::heavy_tail(2.0, 2)});
    REQUIRE(env.ok);
    CHECK(env.llogl.divergent);
}

TEST_CASE("geometric sampling goodness of fit") {
    auto g = OffspringPMF::geometric(0.5);
    Rng r(123);
    const int n = 100000;
    std::vector<int> counts(12, 0);
    for (int i = 0; i < n; ++i)
        counts[static_cast<std::size_t>(std::min<std::int64_t>(g.sample(r), 11))]++;
    double stat = 0.0;
    for (int k = 1; k <= 10; ++k) {
        double e = n * g.pmf(k);
        stat += (counts[k] - e) * (counts[k] - e) / e;
    }
    double etail = n * g.tail(11);
    stat += (counts[11] - etail) * (counts[11] - etail) / etail;
    CHECK(chi_square_pvalue(stat, 10) > 0.01);
}

TEST_CASE("heavy-tail sampler matches its pmf head and truncated mean") {
    auto h = OffspringPMF::heavy_tail(2.0, 2);
    Rng r(321);
    const int n = 200000;
    std::map<std::int64_t, int> counts;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        auto k = h.sample(r);
        counts[std::min<std::int64_t>(k, 9)]++;
        sum += static_cast<double>(k);
    }
    for (std::int64_t k = 1; k <= 8; ++k) {
        double e = n * h.pmf(k);
        CHECK(std::fabs(counts[k] - e) < 5.0 * std::sqrt(e) + 5.0);
    }
    // truncated mean: mu - deficit; the sample mean has heavy-tailed noise,
    // so only a loose sanity band is meaningful here
    double mt = h.mean() - h.truncation_mean_deficit();
    CHECK(mt == doctest::Approx(1.968).epsilon(0.01));
    CHECK(sum / n > 1.5);
    CHECK(sum / n < 4.0);
}

TEST_CASE("compound sample_sum agrees with looped draws in law") {
    Rng r(55);
    auto g = OffspringPMF::geometric(0.5);
    const int reps = 20000;
    const std::int64_t c = 64;
    double m1 = 0.0, v1 = 0.0;
    for (int i = 0; i < reps; ++i) {
        double x = static_cast<double>(g.sample_sum(r, c));
        m1 += x;
        v1 += x * x;
    }
    m1 /= reps;
    v1 = v1 / reps - m1 * m1;
    // sum of 64 iid geom(1/2): mean 128, var 64 * 2 = 128
    CHECK(std::fabs(m1 - 128.0) < 4.0 * std::sqrt(128.0 / reps));
    CHECK(std::fabs(v1 - 128.0) < 12.0);

    auto e = OffspringPMF::explicit_pmf({{1, 0.5}, {4, 0.5}});
    double m2 = 0.0;
    for (int i = 0; i < reps; ++i) m2 += static_cast<double>(e.sample_sum(r, c));
    m2 /= reps;
    CHECK(std::fabs(m2 - 64 * 2.5) < 4.0 * std::sqrt(64 * 2.25 / reps));
}

TEST_CASE("delta compound is exact") {
    Rng r(1);
    CHECK(OffspringPMF::delta(3).sample_sum(r, 1000) == 3000);
}
