#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bmc/population.hpp"
#include "bmc/state_space.hpp"

namespace bmc {

/// Cylinder (shadow) of the tree boundary: the set of ends passing through
/// the anchor vertex. Anchors at a fixed depth partition the boundary.
struct Cylinder {
    Vertex anchor = 0;  // must not be the root
};

/// Test function on the boundary: finite combination of cylinder indicators.
struct TestFunction {
    std::vector<std::pair<Vertex, double>> cylinders;  // (anchor, coefficient)
};

/// Measure on the boundary tabulated by its cylinder masses up to `depth`.
struct BoundaryMeasureTable {
    int depth = 0;
    std::vector<std::pair<Vertex, double>> masses;  // anchors sorted by (depth, word)
    double total = 0.0;                             // sum of depth-1 masses

    std::string to_csv(const Space& space) const;
};

struct SpectralRadiusEstimate {
    double value = 0.0;  // (p^(2n)(o,o))^{1/(2n)}, a certified lower bound
    double lower = 0.0;
    double upper = 0.0;  // Collatz-Wielandt bound on the radial chain
};

struct DeepeningResult {
    double value = 0.0;
    double lower = 0.0, upper = 0.0;  // certified sandwich
    int radius = 0;                   // truncation depth reached
};

/// Harmonic analysis of a transient nearest-neighbour walk on a tree /
/// free-group Cayley graph: directed first-passage probabilities, hitting
/// (harmonic) measures of boundary cylinders, Green function, Martin kernel,
/// spectral radius. Everything reduces to per-letter or per-depth
/// first-passage numbers:
///   group-invariant laws   F(x -> xg) = F_g, the minimal solution of
///                          F_g = w_g + sum_{h != g} w_h F_{h^-1} F_g
///   radial laws            F(child -> parent) = F_b solving the scalar
///                          quadratic (1-b) F^2 - F + b = 0 (minimal root),
///                          F(depth j -> given child) = u_j by recursion.
/// Hitting probabilities of non-adjacent vertices are products of the
/// directed values along the geodesic. Immutable and shareable after
/// construction.
class TreeBoundary {
public:
    explicit TreeBoundary(std::shared_ptr<const Space> space);

    const Space& space() const { return *space_; }
    bool transient() const { return transient_; }

    /// Directed first passage between adjacent vertices.
    double first_passage(Vertex x, Vertex y) const;
    /// Probability of ever hitting v from x (product along the geodesic).
    double hit_prob(Vertex x, Vertex v) const;
    /// Expected number of visits to y starting from x.
    double green(Vertex x, Vertex y) const;
    /// Martin kernel K_o(x,y) = G(x,y)/G(o,y).
    double martin(Vertex x, Vertex y) const;

    /// kappa_x(shadow(anchor)): probability that the walk's boundary limit
    /// passes through the anchor.
    double cylinder(Vertex x, Vertex anchor) const;

    /// All cylinder anchors with depth in [1, depth], sorted by (depth, word).
    std::vector<Vertex> anchors_to_depth(int depth) const;

    /// kappa_m table to the given depth: mass(v) = sum_x m(x) kappa_x(v).
    BoundaryMeasureTable kappa_population(const Population& m, int depth,
                                          bool normalized = false) const;

    /// Iterative-deepening absorption solve for kappa_x(shadow(anchor)) on
    /// the lumped spine truncation, with certified front bounds
    /// (data 1 - z^{L-n} / 1 on the shadow side, 0 / z^{L-n} outside, where
    /// z is the one-level descent probability of the radial chain). The
    /// independent reference for the closed-form route; isotropic laws only.
    DeepeningResult cylinder_by_deepening(Vertex x, Vertex anchor, double tol = 1e-10,
                                          int max_radius = 4096) const;

    /// Spectral radius from exact even-step return probabilities of the
    /// radial chain, bracketed by the Collatz-Wielandt bound. Isotropic
    /// (simple / radial) laws only.
    SpectralRadiusEstimate spectral_radius(int n_max, double tol = 1e-2) const;

    /// Exact p^(n)(o,o) for n = 0..n_max on the radial chain.
    std::vector<double> radial_return_probabilities(int n_max) const;

    /// Green function of the radius-L truncation (absorbing front) of the
    /// radial chain, from distance a to distance b: the linear-solve oracle.
    double green_radial_truncated(int from, int to, int radius) const;

    bool isotropic() const;  // simple or radial step law

private:
    std::shared_ptr<const Space> space_;
    bool transient_ = false;
    // group-invariant laws
    bool group_mode_ = false;
    std::vector<double> letter_F_;  // F_g per letter
    // radial laws
    double back_ = 0.0;
    double fb_ = 1.0;  // child -> parent
    mutable std::vector<double> down_F_;  // u_j, extended lazily
    mutable std::mutex down_mutex_;

    double down_f(int depth) const;  // F(depth j -> fixed child)
    double edge_F(Vertex from, int letter, bool upward) const;
    double return_prob(Vertex y) const;  // U(y)
    double h_at_anchor(Vertex anchor) const;
};

/// f^phi(x) = <kappa_x, phi>, memoised per vertex; thread safe.
class HarmonicExtension {
public:
    HarmonicExtension(std::shared_ptr<const TreeBoundary> boundary, TestFunction phi);
    double operator()(Vertex x) const;
    const TestFunction& phi() const { return phi_; }

private:
    std::shared_ptr<const TreeBoundary> boundary_;
    TestFunction phi_;
    mutable std::unordered_map<Vertex, double> cache_;
    mutable std::mutex mutex_;
};

/// Graph-side continuous extension of a cylinder test function: the
/// combination of subtree indicators with the same coefficients. Its
/// boundary trace is phi, so pairing the empirical distribution against it
/// realises weak* convergence statements on the compactified space.
double subtree_indicator_extension(const Space& space, const TestFunction& phi, Vertex x);

/// Dense Green solve (I - Q) g = e_target on the interior of a truncation;
/// the oracle for explicit kernels and small balls.
std::vector<double> green_column_truncated(const Space& space, const TruncatedSpace& trunc,
                                           Vertex target);

/// Largest eigenvalue of the interior substochastic matrix by power
/// iteration: a lower estimate of the spectral radius for explicit kernels.
double spectral_radius_truncated(const TruncatedSpace& trunc, int iters = 2000);

}  // namespace bmc
