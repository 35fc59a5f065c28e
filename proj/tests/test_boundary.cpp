#include <doctest.h>

#include <cmath>
#include <memory>

#include "bmc/boundary.hpp"
#include "bmc/rng.hpp"

using namespace bmc;

static std::shared_ptr<const Space> tree(int d) {
    return std::make_shared<Space>(Space::tree(d, StepLaw{}));
}
static std::shared_ptr<const Space> radial_tree(int d, double back) {
    return std::make_shared<Space>(Space::tree(d, StepLaw{.kind = StepLaw::Kind::radial, .back = back}));
}

TEST_CASE("first passage on simple trees solves the scalar quadratic") {
    // F = 1/d + ((d-1)/d) F^2, minimal root 1/(d-1)
    for (int d : {3, 4, 5}) {
        auto b = TreeBoundary(tree(d));
        CHECK(b.transient());
        auto sp = tree(d);
        Vertex child = sp->codec().push_raw(sp->root(), 0);
        CHECK(b.first_passage(child, sp->root()) ==
              doctest::Approx(1.0 / (d - 1)).epsilon(1e-12));
        CHECK(b.first_passage(sp->root(), child) ==
              doctest::Approx(1.0 / (d - 1)).epsilon(1e-12));
    }
}

TEST_CASE("near-critical radial kernel: first passage reaches one, transience flag drops") {
    auto sp = radial_tree(3, 0.5);
    TreeBoundary b(sp);
    CHECK(!b.transient());
    Vertex child = sp->codec().push_raw(sp->root(), 0);
    CHECK(b.first_passage(child, sp->root()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(b.green(sp->root(), sp->root()), std::domain_error);
}

TEST_CASE("free group with non-uniform weights stays consistent") {
    // drifting walk on F_2; transition invariance gives one F per letter
    StepLaw law;
    law.kind = StepLaw::Kind::generator_weights;
    law.weights = {0.4, 0.1, 0.3, 0.2};  // a, A, b, B
    auto sp = std::make_shared<Space>(Space::free_group(2, law));
    TreeBoundary b(sp);
    CHECK(b.transient());
    // F_g solves F_g = w_g + sum_{h != g} w_h F_{h^-1} F_g; verify residual
    const auto& c = sp->codec();
    for (int g = 0; g < 4; ++g) {
        Vertex xg = c.push_raw(sp->root(), g);
        double fg = b.first_passage(sp->root(), xg);
        double ret = 0.0;
        for (int h = 0; h < 4; ++h) {
            if (h == g) continue;
            Vertex xh = c.push_raw(sp->root(), h);
            ret += law.weights[static_cast<std::size_t>(h)] * b.first_passage(xh, sp->root());
        }
        CHECK(fg == doctest::Approx(law.weights[static_cast<std::size_t>(g)] + ret * fg).epsilon(1e-12));
    }
}

TEST_CASE("cylinder masses on T3: symmetry and closed form") {
    auto sp = tree(3);
    TreeBoundary b(sp);
    auto anchors1 = b.anchors_to_depth(1);
    REQUIRE(anchors1.size() == 3);
    for (Vertex v : anchors1)
        CHECK(b.cylinder(sp->root(), v) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    // depth n: 1/(d (d-1)^{n-1})
    for (int n = 1; n <= 4; ++n) {
        auto anchors = b.anchors_to_depth(n);
        double want = 1.0 / (3.0 * std::pow(2.0, n - 1));
        double sum = 0.0;
        for (Vertex v : anchors) {
            if (sp->codec().len(v) != n) continue;
            CHECK(b.cylinder(sp->root(), v) == doctest::Approx(want).epsilon(1e-8));
            sum += b.cylinder(sp->root(), v);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));  // partition
    }
}

TEST_CASE("cylinder value for a vertex inside the shadow") {
    auto sp = tree(3);
    TreeBoundary b(sp);
    Vertex anchor = sp->parse_vertex("0");
    Vertex inside = sp->parse_vertex("01");
    double got = b.cylinder(inside, anchor);
    // composite form: 1 - F(x->v) (1 - h(v))
    double f = 0.5;  // per-edge first passage on T3
    double hv = (1.0 - f) / (1.0 - f * f);
    CHECK(got == doctest::Approx(1.0 - f * (1.0 - hv)).epsilon(1e-12));
    // and the deepening oracle agrees
    auto deep = b.cylinder_by_deepening(inside, anchor, 1e-10);
    CHECK(got >= deep.lower - 1e-10);
    CHECK(got <= deep.upper + 1e-10);
    CHECK(got == doctest::Approx(deep.value).epsilon(1e-9));
}

TEST_CASE("deepening oracle certifies the closed forms at the root") {
    for (auto spc : {tree(3), radial_tree(3, 0.3)}) {
        TreeBoundary b(spc);
        for (const char* word : {"0", "01", "012", "1"}) {
            Vertex anchor = spc->parse_vertex(word);
            double primary = b.cylinder(spc->root(), anchor);
            auto deep = b.cylinder_by_deepening(spc->root(), anchor, 1e-10);
            CHECK(deep.upper - deep.lower < 1e-10);
            CHECK(primary >= deep.lower - 1e-10);
            CHECK(primary <= deep.upper + 1e-10);
        }
    }
}

TEST_CASE("stationarity: kappa_x = sum_y p(x,y) kappa_y on a radius-4 ball") {
    for (auto spc : {tree(3), radial_tree(4, 0.35)}) {
        TreeBoundary b(spc);
        auto ball = spc->truncate(2, 2);  // radius 4
        auto anchors = b.anchors_to_depth(3);
        for (Vertex x : ball.verts) {
            for (Vertex a : anchors) {
                double lhs = b.cylinder(x, a);
                double rhs = 0.0;
                for (auto [y, p] : spc->neighbors(x)) rhs += p * b.cylinder(y, a);
                CHECK(std::fabs(lhs - rhs) < 1e-10);
            }
        }
    }
}

TEST_CASE("kappa_population: additivity and exact total mass") {
    auto sp = tree(3);
    auto b = TreeBoundary(sp);
    auto t1 = b.kappa_population(Population::singleton(sp->root()), 1);
    REQUIRE(t1.masses.size() == 3);
    for (auto [v, mass] : t1.masses) CHECK(mass == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(t1.total == doctest::Approx(1.0).epsilon(1e-12));

    auto t2 = b.kappa_population(Population::singleton(sp->root(), 2), 1);
    for (auto [v, mass] : t2.masses) CHECK(mass == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(t2.total == doctest::Approx(2.0).epsilon(1e-12));

    // random population of size 10 within radius 3
    Rng r(404);
    std::vector<Population::Entry> entries;
    for (int i = 0; i < 10; ++i) {
        Vertex v = sp->root();
        for (int j = 0; j < static_cast<int>(r.below(4)); ++j) v = sp->sample_step(v, r);
        entries.emplace_back(v, 1);
    }
    auto m = Population::from_pairs(entries);
    auto t = b.kappa_population(m, 2);
    CHECK(t.total == doctest::Approx(static_cast<double>(m.total())).epsilon(1e-10));
    // consistency: parent mass equals the sum over children
    for (auto [v, mass] : t.masses) {
        if (sp->codec().len(v) != 1) continue;
        double child_sum = 0.0;
        for (auto [w, mw] : t.masses)
            if (sp->codec().len(w) == 2 && sp->codec().common_prefix(w, v) == 1) child_sum += mw;
        CHECK(std::fabs(mass - child_sum) < 1e-10);
    }
}

TEST_CASE("green function matches the closed form and the truncation oracle") {
    auto sp = tree(3);
    TreeBoundary b(sp);
    Vertex o = sp->root();
    Vertex y = sp->parse_vertex("0");
    CHECK(b.green(o, o) == doctest::Approx(2.0).epsilon(1e-12));  // (d-1)/(d-2)
    CHECK(b.green(o, y) == doctest::Approx(1.0).epsilon(1e-12));
    // truncation oracle at radius 60: error ~ 2^-60
    CHECK(b.green(o, o) == doctest::Approx(b.green_radial_truncated(0, 0, 60)).epsilon(1e-10));
    CHECK(b.green(o, y) == doctest::Approx(b.green_radial_truncated(1, 0, 60)).epsilon(1e-10));
    // dense ball oracle, radius 8: the ball solve and the radial solve are
    // the same linear system for G_L(o,o), and both sit 2^-8-close to G
    auto ball = sp->truncate(4, 4);
    auto col = green_column_truncated(*sp, ball, o);
    CHECK(col[ball.index.at(o)] ==
          doctest::Approx(b.green_radial_truncated(0, 0, 8)).epsilon(1e-10));
    CHECK(std::fabs(col[ball.index.at(o)] - 2.0) < 0.02);
    CHECK(std::fabs(col[ball.index.at(y)] - 1.0) < 0.02);

    // Martin kernel normalisation
    CHECK(b.martin(o, y) == doctest::Approx(b.green(o, y) / b.green(o, y)).epsilon(1e-14));
    for (const char* w : {"0", "01", "12"})
        CHECK(b.martin(o, sp->parse_vertex(w)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("green symmetry for the simple walk") {
    auto sp = tree(3);
    TreeBoundary b(sp);
    Rng r(11);
    for (int rep = 0; rep < 50; ++rep) {
        Vertex x = sp->root(), y = sp->root();
        for (int j = 0; j < static_cast<int>(r.below(5)); ++j) x = sp->sample_step(x, r);
        for (int j = 0; j < static_cast<int>(r.below(5)); ++j) y = sp->sample_step(y, r);
        CHECK(b.green(x, y) == doctest::Approx(b.green(y, x)).epsilon(1e-8));
    }
}

TEST_CASE("harmonic extension: constants, oracle value, antisymmetry") {
    auto sp = tree(3);
    auto b = std::make_shared<TreeBoundary>(sp);

    TestFunction full;
    for (Vertex v : b->anchors_to_depth(1)) full.cylinders.emplace_back(v, 1.0);
    HarmonicExtension ext_full(b, full);
    for (const char* w : {"o", "0", "01", "210"})
        CHECK(ext_full(sp->parse_vertex(w)) == doctest::Approx(1.0).epsilon(1e-10));

    TestFunction one_cyl{{{sp->parse_vertex("0"), 1.0}}};
    HarmonicExtension ext(b, one_cyl);
    CHECK(ext(sp->root()) == doctest::Approx(1.0 / 3).epsilon(1e-10));
    // stationarity at the root
    double pf = 0.0;
    for (auto [y, p] : sp->neighbors(sp->root())) pf += p * ext(y);
    CHECK(pf == doctest::Approx(ext(sp->root())).epsilon(1e-10));

    TestFunction signed_pair{{{sp->parse_vertex("0"), 1.0}, {sp->parse_vertex("1"), -1.0}}};
    HarmonicExtension ext_pm(b, signed_pair);
    CHECK(ext_pm(sp->root()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("subtree indicator extension matches cylinder membership") {
    auto sp = tree(3);
    TestFunction phi{{{sp->parse_vertex("0"), 2.0}, {sp->parse_vertex("01"), -0.5}}};
    CHECK(subtree_indicator_extension(*sp, phi, sp->parse_vertex("01")) == doctest::Approx(1.5));
    CHECK(subtree_indicator_extension(*sp, phi, sp->parse_vertex("02")) == doctest::Approx(2.0));
    CHECK(subtree_indicator_extension(*sp, phi, sp->parse_vertex("1")) == doctest::Approx(0.0));
    CHECK(subtree_indicator_extension(*sp, phi, sp->root()) == doctest::Approx(0.0));
}

TEST_CASE("spectral radius estimates bracket 2 sqrt(d-1)/d") {
    auto b3 = TreeBoundary(tree(3));
    auto est3 = b3.spectral_radius(2000);
    double want3 = 2.0 * std::sqrt(2.0) / 3.0;
    CHECK(std::fabs(est3.value - want3) < 1e-2);
    CHECK(est3.lower <= want3 + 1e-12);
    CHECK(est3.upper >= want3 - 1e-12);
    CHECK(est3.upper == doctest::Approx(want3).epsilon(1e-12));  // CW bound is tight here

    auto b4 = TreeBoundary(tree(4));
    auto est4 = b4.spectral_radius(2000);
    double want4 = 2.0 * std::sqrt(3.0) / 4.0;
    CHECK(std::fabs(est4.value - want4) < 1e-2);

    // too-small n_max cannot bracket at 1e-4
    CHECK_THROWS(b3.spectral_radius(50, 1e-4));
    // non-isotropic and non-transient inputs are rejected
    StepLaw law;
    law.kind = StepLaw::Kind::generator_weights;
    law.weights = {0.4, 0.1, 0.3, 0.2};
    TreeBoundary bw(std::make_shared<Space>(Space::free_group(2, law)));
    CHECK_THROWS_AS(bw.spectral_radius(100), std::domain_error);
    TreeBoundary brec(radial_tree(3, 0.5));
    CHECK_THROWS_AS(brec.spectral_radius(100), std::domain_error);
}

TEST_CASE("power iteration on truncations approaches the spectral radius from below") {
    auto sp = tree(3);
    auto small = sp->truncate(4, 4);
    auto bigger = sp->truncate(6, 6);
    double r_small = spectral_radius_truncated(small);
    double r_big = spectral_radius_truncated(bigger);
    double want = 2.0 * std::sqrt(2.0) / 3.0;
    CHECK(r_small < want);
    CHECK(r_big < want);
    CHECK(r_big > r_small);
    CHECK(want - r_big < 0.1);
}

TEST_CASE("harmonic measures converge to the point mass along a ray") {
    auto sp = tree(3);
    TreeBoundary b(sp);
    // march along the ray 0101...; cylinders to depth 3 at n = 12
    std::string ray = "010101010101";
    Vertex x12 = sp->parse_vertex(ray);
    for (Vertex a : b.anchors_to_depth(3)) {
        double got = b.cylinder(x12, a);
        bool on_ray = sp->codec().common_prefix(x12, a) == sp->codec().len(a);
        CHECK(std::fabs(got - (on_ray ? 1.0 : 0.0)) < 1e-3);
    }
}
