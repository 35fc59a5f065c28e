#include <doctest.h>

#include <cmath>
#include <map>

#include "bmc/population.hpp"
#include "bmc/rng.hpp"

using namespace bmc;

static Space t3() { return Space::tree(3, StepLaw{}); }

TEST_CASE("empirical distribution") {
    auto sp = t3();
    Vertex x = sp.parse_vertex("0"), y = sp.parse_vertex("1");
    auto m = Population::from_pairs({{x, 2}, {y, 1}});
    auto e = m.empirical();
    std::map<Vertex, double> got(e.begin(), e.end());
    CHECK(got[x] == doctest::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(got[y] == doctest::Approx(1.0 / 3).epsilon(1e-14));

    auto single = Population::singleton(x);
    CHECK(single.empirical().size() == 1);
    CHECK(single.empirical()[0].second == 1.0);

    std::vector<Population::Entry> five;
    for (int i = 0; i < 5; ++i) five.emplace_back(sp.parse_vertex(std::string("0") + "121"[i % 3]) , 1);
    // five distinct-ish entries may collide; build explicitly instead
    five = {{sp.parse_vertex("0"), 1}, {sp.parse_vertex("1"), 1}, {sp.parse_vertex("2"), 1},
            {sp.parse_vertex("01"), 1}, {sp.parse_vertex("02"), 1}};
    auto u = Population::from_pairs(five);
    for (auto [v, p] : u.empirical()) CHECK(p == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("exact-rational empirical masses sum to one exactly") {
    auto sp = t3();
    auto m = Population::from_pairs({{sp.parse_vertex("0"), 3}, {sp.parse_vertex("1"), 7},
                                     {sp.parse_vertex("02"), 11}});
    Rational sum(0);
    for (const auto& [v, r] : m.empirical_exact()) sum = sum + r;
    CHECK(sum == Rational(1));
}

TEST_CASE("empty population operations throw") {
    Population m;
    CHECK_THROWS_AS(m.empirical(), std::domain_error);
}

TEST_CASE("lift is the pairing <m,f>") {
    auto sp = t3();
    Vertex x = sp.parse_vertex("0"), y = sp.parse_vertex("1");
    auto m = Population::from_pairs({{x, 2}, {y, 1}});

    CHECK(m.lift([](Vertex) { return 1.0; }) == doctest::Approx(3.0));
    auto dx = Population::singleton(x);
    auto f = [&](Vertex v) { return v == x ? 2.5 : -1.0; };
    CHECK(dx.lift(f) == doctest::Approx(2.5));

    // brute-force particle enumeration oracle
    double brute = 0.0;
    for (const auto& [v, c] : m.entries())
        for (std::int64_t i = 0; i < c; ++i) brute += f(v);
    CHECK(m.lift(f) == doctest::Approx(brute).epsilon(1e-15));
}

TEST_CASE("lift(m,1) equals size for random populations") {
    auto sp = t3();
    Rng r(21);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Population::Entry> entries;
        int k = static_cast<int>(r.below(6)) + 1;
        for (int i = 0; i < k; ++i) {
            Vertex v = sp.root();
            for (int j = 0; j < static_cast<int>(r.below(5)); ++j) v = sp.sample_step(v, r);
            entries.emplace_back(v, static_cast<std::int64_t>(r.below(9)) + 1);
        }
        auto m = Population::from_pairs(entries);
        CHECK(m.lift([](Vertex) { return 1.0; }) == doctest::Approx(static_cast<double>(m.total())));
    }
}

TEST_CASE("merge adds pointwise and in size") {
    auto sp = t3();
    Vertex x = sp.parse_vertex("0");
    auto two = Population::singleton(x).merge(Population::singleton(x));
    CHECK(two.total() == 2);
    CHECK(two.count(x) == 2);
    CHECK(two.distinct_sites() == 1);

    Rng r(8);
    auto rand_pop = [&] {
        std::vector<Population::Entry> entries;
        int k = static_cast<int>(r.below(5)) + 1;
        for (int i = 0; i < k; ++i) {
            Vertex v = sp.root();
            for (int j = 0; j < static_cast<int>(r.below(4)); ++j) v = sp.sample_step(v, r);
            entries.emplace_back(v, static_cast<std::int64_t>(r.below(5)) + 1);
        }
        return Population::from_pairs(entries);
    };
    for (int rep = 0; rep < 100; ++rep) {
        auto a = rand_pop(), b = rand_pop(), c = rand_pop();
        CHECK(a.merge(b).total() == a.total() + b.total());
        // commutative + associative
        auto ab = a.merge(b), ba = b.merge(a);
        CHECK(ab.entries() == ba.entries());
        auto abc1 = a.merge(b).merge(c), abc2 = a.merge(b.merge(c));
        CHECK(abc1.entries() == abc2.entries());
        // lift additivity
        auto f = [](Vertex v) { return static_cast<double>(v % 97) * 0.25; };
        CHECK(ab.lift(f) == doctest::Approx(a.lift(f) + b.lift(f)).epsilon(1e-12));
    }
}

TEST_CASE("population CSV serialisation") {
    auto sp = t3();
    auto m = Population::from_pairs({{sp.parse_vertex("0"), 2}, {sp.root(), 1}});
    CHECK(m.to_csv(sp) == "vertex,count\no,1\n0,2\n");
}

TEST_CASE("counts must be positive") {
    CHECK_THROWS_AS(Population::singleton(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(Population::from_pairs({{0, -2}}), std::invalid_argument);
}
