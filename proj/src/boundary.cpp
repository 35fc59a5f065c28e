#include "bmc/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bmc {

namespace {
constexpr double kFixedPointTol = 1e-15;
constexpr int kFixedPointCap = 500000;
}  // namespace

TreeBoundary::TreeBoundary(std::shared_ptr<const Space> space) : space_(std::move(space)) {
    if (!space_ || !space_->is_word_space())
        throw std::invalid_argument("tree boundary needs a nearest-neighbour tree / free-group space");
    const auto& law = space_->step_law();
    int d = space_->degree();
    if (law.kind == StepLaw::Kind::radial) {
        back_ = law.back;
        fb_ = back_ < 0.5 ? back_ / (1.0 - back_) : 1.0;
        transient_ = back_ < 0.5 - 1e-12;
    } else {
        group_mode_ = true;
        std::vector<double> w(static_cast<std::size_t>(d));
        for (int g = 0; g < d; ++g) w[static_cast<std::size_t>(g)] = space_->letter_prob(g);
        // minimal fixed point of F_g = w_g + sum_{h != g} w_h F_{h^-1} F_g,
        // monotone Gauss-Seidel sweep from zero
        letter_F_.assign(static_cast<std::size_t>(d), 0.0);
        const auto& codec = space_->codec();
        bool converged = false;
        for (int it = 0; it < kFixedPointCap && !converged; ++it) {
            double delta = 0.0;
            for (int g = 0; g < d; ++g) {
                double ret = 0.0;
                for (int h = 0; h < d; ++h) {
                    if (h == g) continue;
                    ret += w[static_cast<std::size_t>(h)] *
                           letter_F_[static_cast<std::size_t>(codec.inverse(h))];
                }
                double next = w[static_cast<std::size_t>(g)] /
                              std::max(1e-300, 1.0 - ret);
                // direct damped form of the fixed-point equation; keep the
                // monotone-from-below update instead when ret >= 1
                if (ret < 1.0) {
                    next = std::min(1.0, next);
                } else {
                    next = 1.0;
                }
                double old = letter_F_[static_cast<std::size_t>(g)];
                if (next < old) next = old;  // monotone from below
                delta = std::max(delta, next - old);
                letter_F_[static_cast<std::size_t>(g)] = next;
            }
            converged = delta < kFixedPointTol;
        }
        double u = 0.0;
        for (int g = 0; g < d; ++g)
            u += w[static_cast<std::size_t>(g)] *
                 letter_F_[static_cast<std::size_t>(space_->codec().inverse(g))];
        transient_ = converged && u < 1.0 - 1e-9;
        if (law.kind == StepLaw::Kind::simple) {
            back_ = 1.0 / d;
            fb_ = letter_F_[0];
        }
    }
}

bool TreeBoundary::isotropic() const {
    return space_->step_law().kind != StepLaw::Kind::generator_weights;
}

double TreeBoundary::down_f(int depth) const {
    const auto& law = space_->step_law();
    if (law.kind == StepLaw::Kind::simple) return fb_;  // vertex transitive
    if (law.kind != StepLaw::Kind::radial)
        throw std::domain_error("per-depth first passage requires an isotropic law");
    std::lock_guard<std::mutex> lock(down_mutex_);
    int d = space_->degree();
    double f = (1.0 - back_) / (d - 1);
    if (down_F_.empty()) {
        double denom = 1.0 - (d - 1) * fb_ / static_cast<double>(d);
        down_F_.push_back((1.0 / d) / denom);
    }
    while (static_cast<int>(down_F_.size()) <= depth) {
        double prev = down_F_.back();
        double denom = 1.0 - (d - 2) * f * fb_ - back_ * prev;
        down_F_.push_back(f / denom);
    }
    return down_F_[static_cast<std::size_t>(depth)];
}

double TreeBoundary::edge_F(Vertex from, int letter, bool upward) const {
    if (group_mode_) return letter_F_[static_cast<std::size_t>(letter)];
    if (upward) return fb_;
    return down_f(space_->codec().len(from));
}

double TreeBoundary::first_passage(Vertex x, Vertex y) const {
    const auto& c = space_->codec();
    if (space_->distance(x, y) != 1)
        throw std::invalid_argument("first_passage needs adjacent vertices");
    if (c.len(y) == c.len(x) + 1) return edge_F(x, c.letter(y, c.len(x)), false);
    return edge_F(x, c.inverse(c.last(x)), true);
}

double TreeBoundary::hit_prob(Vertex x, Vertex v) const {
    if (x == v) return 1.0;
    const auto& c = space_->codec();
    int lcp = c.common_prefix(x, v);
    double prod = 1.0;
    Vertex cur = x;
    for (int i = c.len(x) - 1; i >= lcp; --i) {
        prod *= edge_F(cur, c.inverse(c.letter(x, i)), true);
        cur = c.pop(cur);
    }
    for (int i = lcp; i < c.len(v); ++i) {
        prod *= edge_F(cur, c.letter(v, i), false);
        cur = c.push_raw(cur, c.letter(v, i));
    }
    return prod;
}

double TreeBoundary::return_prob(Vertex y) const {
    const auto& c = space_->codec();
    int d = space_->degree();
    if (group_mode_) {
        double u = 0.0;
        for (int g = 0; g < d; ++g)
            u += space_->letter_prob(g) * letter_F_[static_cast<std::size_t>(c.inverse(g))];
        return u;
    }
    int k = c.len(y);
    if (k == 0) return fb_;
    return back_ * down_f(k - 1) + (1.0 - back_) * fb_;
}

double TreeBoundary::green(Vertex x, Vertex y) const {
    if (!transient_) throw std::domain_error("Green function requires a transient kernel");
    double gyy = 1.0 / (1.0 - return_prob(y));
    if (x == y) return gyy;
    return hit_prob(x, y) * gyy;
}

double TreeBoundary::martin(Vertex x, Vertex y) const {
    return green(x, y) / green(space_->root(), y);
}

double TreeBoundary::h_at_anchor(Vertex anchor) const {
    const auto& c = space_->codec();
    Vertex p = c.pop(anchor);
    double f_vp = edge_F(anchor, c.inverse(c.last(anchor)), true);
    double f_pv = edge_F(p, c.last(anchor), false);
    return (1.0 - f_vp) / (1.0 - f_vp * f_pv);
}

double TreeBoundary::cylinder(Vertex x, Vertex anchor) const {
    if (!transient_) throw std::domain_error("hitting measures require a transient kernel");
    const auto& c = space_->codec();
    if (c.len(anchor) < 1) throw std::invalid_argument("cylinder anchor must differ from the root");
    double hv = h_at_anchor(anchor);
    int lcp = c.common_prefix(x, anchor);
    if (lcp == c.len(anchor))  // x inside the subtree below the anchor
        return 1.0 - hit_prob(x, anchor) * (1.0 - hv);
    return hit_prob(x, anchor) * hv;
}

std::vector<Vertex> TreeBoundary::anchors_to_depth(int depth) const {
    if (depth < 1) throw std::invalid_argument("cylinder depth must be >= 1");
    const auto& c = space_->codec();
    int d = space_->degree();
    std::vector<Vertex> out, prev;
    for (int g = 0; g < d; ++g) prev.push_back(c.push_raw(space_->root(), g));
    out = prev;
    for (int lvl = 2; lvl <= depth; ++lvl) {
        std::vector<Vertex> next;
        for (Vertex v : prev)
            for (int g = 0; g < d; ++g) {
                if (g == c.inverse(c.last(v))) continue;
                next.push_back(c.push_raw(v, g));
            }
        out.insert(out.end(), next.begin(), next.end());
        prev = std::move(next);
    }
    return out;
}

BoundaryMeasureTable TreeBoundary::kappa_population(const Population& m, int depth,
                                                    bool normalized) const {
    if (m.empty()) throw std::domain_error("kappa of an empty population");
    BoundaryMeasureTable table;
    table.depth = depth;
    double scale = normalized ? 1.0 / static_cast<double>(m.total()) : 1.0;
    for (Vertex anchor : anchors_to_depth(depth)) {
        double mass = 0.0;
        for (const auto& [x, cnt] : m.entries())
            mass += static_cast<double>(cnt) * cylinder(x, anchor);
        table.masses.emplace_back(anchor, mass * scale);
        if (space_->codec().len(anchor) == 1) table.total += mass * scale;
    }
    return table;
}

std::string BoundaryMeasureTable::to_csv(const Space& space) const {
    std::string s = "anchor_word,depth,mass\n";
    char buf[64];
    for (const auto& [v, mass] : masses) {
        std::snprintf(buf, sizeof buf, "%.17g", mass);
        s += space.vertex_name(v) + "," + std::to_string(space.codec().len(v)) + "," + buf + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Iterative-deepening absorption solve on the lumped spine quotient.
//
// For an isotropic kernel the walk's position relative to the geodesic
// [root, anchor] is Markov on a quotient graph: the spine vertices s_0..s_n,
// one lumped side ray per spine vertex, and the lumped shadow ray below the
// anchor. Rays are eliminated by backward substitution (h_k = a h_{k-1} + g),
// the spine solves as a tridiagonal system, and absorbing front data at tree
// depth L carries the certified bounds
//     shadow side: true value in [1 - z^{L-n}, 1]
//     outside:     true value in [0, z^{L-n}]
// where z = back/(1-back) bounds the probability that the radial chain ever
// descends one level. Solving with both extremes sandwiches the limit.
// ---------------------------------------------------------------------------

namespace {

struct RayFold {
    double alpha = 0.0, gamma = 0.0;  // h_1 = alpha * h_attach + gamma
    bool front_only = false;          // ray has no interior state
    double front_value = 0.0;
};

RayFold fold_ray(int interior_len, double beta, double front_value) {
    RayFold r;
    if (interior_len <= 0) {
        r.front_only = true;
        r.front_value = front_value;
        return r;
    }
    double alpha = beta, gamma = (1.0 - beta) * front_value;
    for (int k = interior_len - 1; k >= 1; --k) {
        double denom = 1.0 - (1.0 - beta) * alpha;
        alpha = beta / denom;
        gamma = (1.0 - beta) * gamma / denom;
    }
    r.alpha = alpha;
    r.gamma = gamma;
    return r;
}

}  // namespace

DeepeningResult TreeBoundary::cylinder_by_deepening(Vertex x, Vertex anchor, double tol,
                                                    int max_radius) const {
    if (!isotropic())
        throw std::domain_error("deepening oracle supports isotropic (simple/radial) laws only");
    const auto& c = space_->codec();
    int n = c.len(anchor);
    if (n < 1) throw std::invalid_argument("cylinder anchor must differ from the root");
    int d = space_->degree();
    double beta = space_->step_law().kind == StepLaw::Kind::radial ? space_->step_law().back
                                                                   : 1.0 / d;
    double zeta = beta < 0.5 ? beta / (1.0 - beta) : 1.0;
    double f = (1.0 - beta) / (d - 1);

    // classify x relative to the spine
    int lcp = c.common_prefix(x, anchor);
    bool in_shadow = lcp == c.len(anchor);
    int attach = in_shadow ? n : lcp;        // spine index the branch hangs from
    int off = c.len(x) - attach;             // 0 when x is on the spine

    auto solve = [&](int L, bool upper_bound) -> double {
        double bound = std::pow(zeta, static_cast<double>(L - n));
        double g_sub = upper_bound ? 1.0 : std::max(0.0, 1.0 - bound);
        double g_side = upper_bound ? std::min(1.0, bound) : 0.0;

        // fold rays: side ray at spine j has interior length L - j - 1,
        // the shadow ray below the anchor has interior length L - n - 1
        std::vector<RayFold> side(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            side[static_cast<std::size_t>(j)] = fold_ray(L - j - 1, beta, g_side);
        RayFold sub = fold_ray(L - n - 1, beta, g_sub);

        // tridiagonal system for the spine values
        std::vector<double> a(static_cast<std::size_t>(n) + 1, 0.0);  // sub-diag
        std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);  // diag
        std::vector<double> cc(static_cast<std::size_t>(n) + 1, 0.0);  // super-diag
        std::vector<double> rhs(static_cast<std::size_t>(n) + 1, 0.0);
        {
            // root: h0 = (1/d) h1 + ((d-1)/d) * ray0
            const auto& r0 = side[0];
            double w = static_cast<double>(d - 1) / d;
            if (r0.front_only) {
                b[0] = 1.0;
                cc[0] = -1.0 / d;
                rhs[0] = w * r0.front_value;
            } else {
                b[0] = 1.0 - w * r0.alpha;
                cc[0] = -1.0 / d;
                rhs[0] = w * r0.gamma;
            }
        }
        for (int j = 1; j < n; ++j) {
            const auto& rj = side[static_cast<std::size_t>(j)];
            double w = (d - 2) * f;
            a[static_cast<std::size_t>(j)] = -beta;
            cc[static_cast<std::size_t>(j)] = -f;
            if (rj.front_only) {
                b[static_cast<std::size_t>(j)] = 1.0;
                rhs[static_cast<std::size_t>(j)] = w * rj.front_value;
            } else {
                b[static_cast<std::size_t>(j)] = 1.0 - w * rj.alpha;
                rhs[static_cast<std::size_t>(j)] = w * rj.gamma;
            }
        }
        {
            double w = 1.0 - beta;
            a[static_cast<std::size_t>(n)] = -beta;
            if (sub.front_only) {
                b[static_cast<std::size_t>(n)] = 1.0;
                rhs[static_cast<std::size_t>(n)] = w * sub.front_value;
            } else {
                b[static_cast<std::size_t>(n)] = 1.0 - w * sub.alpha;
                rhs[static_cast<std::size_t>(n)] = w * sub.gamma;
            }
        }
        // Thomas algorithm
        for (int j = 1; j <= n; ++j) {
            double m = a[static_cast<std::size_t>(j)] / b[static_cast<std::size_t>(j - 1)];
            b[static_cast<std::size_t>(j)] -= m * cc[static_cast<std::size_t>(j - 1)];
            rhs[static_cast<std::size_t>(j)] -= m * rhs[static_cast<std::size_t>(j - 1)];
        }
        std::vector<double> h(static_cast<std::size_t>(n) + 1, 0.0);
        h[static_cast<std::size_t>(n)] = rhs[static_cast<std::size_t>(n)] / b[static_cast<std::size_t>(n)];
        for (int j = n - 1; j >= 0; --j)
            h[static_cast<std::size_t>(j)] = (rhs[static_cast<std::size_t>(j)] -
                                              cc[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j + 1)]) /
                                             b[static_cast<std::size_t>(j)];

        if (off == 0) return h[static_cast<std::size_t>(attach)];
        // walk back down the hanging ray with its forward recursion
        double beta_r = beta;
        double g = in_shadow ? g_sub : g_side;
        int interior = in_shadow ? L - n - 1 : L - attach - 1;
        if (off > interior) return g;  // x at or beyond the front
        // rebuild alpha/gamma per level (fold_ray keeps only level 1)
        std::vector<double> alpha(static_cast<std::size_t>(interior) + 2, 0.0);
        std::vector<double> gamma(static_cast<std::size_t>(interior) + 2, 0.0);
        alpha[static_cast<std::size_t>(interior)] = beta_r;
        gamma[static_cast<std::size_t>(interior)] = (1.0 - beta_r) * g;
        for (int k = interior - 1; k >= 1; --k) {
            double denom = 1.0 - (1.0 - beta_r) * alpha[static_cast<std::size_t>(k + 1)];
            alpha[static_cast<std::size_t>(k)] = beta_r / denom;
            gamma[static_cast<std::size_t>(k)] = (1.0 - beta_r) * gamma[static_cast<std::size_t>(k + 1)] / denom;
        }
        double val = h[static_cast<std::size_t>(attach)];
        for (int k = 1; k <= off; ++k)
            val = alpha[static_cast<std::size_t>(k)] * val + gamma[static_cast<std::size_t>(k)];
        return val;
    };

    DeepeningResult out;
    double prev = -1.0;
    for (int L = std::max(n + 4, c.len(x) + 4); L <= max_radius; L *= 2) {
        double lo = solve(L, false);
        double hi = solve(L, true);
        out.value = 0.5 * (lo + hi);
        out.lower = lo;
        out.upper = hi;
        out.radius = L;
        bool cauchy = prev >= 0.0 && std::fabs(out.value - prev) < tol;
        if (hi - lo < tol && cauchy) return out;
        prev = out.value;
    }
    throw std::runtime_error("deepening solve did not converge within the radius budget");
}

std::vector<double> TreeBoundary::radial_return_probabilities(int n_max) const {
    if (!isotropic()) throw std::domain_error("radial reduction needs an isotropic law");
    double beta = space_->step_law().kind == StepLaw::Kind::radial ? space_->step_law().back
                                                                   : 1.0 / space_->degree();
    std::vector<double> v(static_cast<std::size_t>(n_max) + 2, 0.0), w(v.size(), 0.0);
    v[0] = 1.0;
    std::vector<double> out{1.0};
    for (int n = 1; n <= n_max; ++n) {
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            if (v[k] == 0.0) continue;
            if (k == 0) {
                w[1] += v[0];
            } else {
                w[k - 1] += v[k] * beta;
                w[k + 1] += v[k] * (1.0 - beta);
            }
        }
        v.swap(w);
        out.push_back(v[0]);
    }
    return out;
}

SpectralRadiusEstimate TreeBoundary::spectral_radius(int n_max, double tol) const {
    if (!isotropic()) throw std::domain_error("spectral radius needs an isotropic kernel");
    if (!transient_) throw std::domain_error("spectral radius estimate needs a transient kernel");
    if (n_max < 4) throw std::invalid_argument("n_max too small");
    double beta = space_->step_law().kind == StepLaw::Kind::radial ? space_->step_law().back
                                                                   : 1.0 / space_->degree();
    auto probs = radial_return_probabilities(2 * (n_max / 2));
    int n2 = 2 * (n_max / 2);
    double p = probs[static_cast<std::size_t>(n2)];
    SpectralRadiusEstimate est;
    est.value = std::exp(std::log(p) / static_cast<double>(n2));
    est.lower = est.value;  // ||lambda||_{L^{2n}} increases to r
    double cstar = std::sqrt(beta / (1.0 - beta));
    est.upper = std::max(cstar, beta / cstar + (1.0 - beta) * cstar);
    if (est.upper - est.lower > tol)
        throw std::runtime_error("n_max too small to bracket the spectral radius at this tolerance");
    return est;
}

double TreeBoundary::green_radial_truncated(int from, int to, int radius) const {
    if (!isotropic()) throw std::domain_error("radial truncation needs an isotropic law");
    if (from >= radius || to >= radius || from < 0 || to < 0)
        throw std::invalid_argument("states must lie inside the truncation");
    double beta = space_->step_law().kind == StepLaw::Kind::radial ? space_->step_law().back
                                                                   : 1.0 / space_->degree();
    int N = radius;
    // (I - Q) g = e_to on states 0..N-1, front at N absorbing
    std::vector<double> a(static_cast<std::size_t>(N), 0.0), b(static_cast<std::size_t>(N), 1.0),
        c(static_cast<std::size_t>(N), 0.0), rhs(static_cast<std::size_t>(N), 0.0);
    c[0] = -1.0;
    for (int k = 1; k < N; ++k) {
        a[static_cast<std::size_t>(k)] = -beta;
        if (k + 1 < N) c[static_cast<std::size_t>(k)] = -(1.0 - beta);
    }
    rhs[static_cast<std::size_t>(to)] = 1.0;
    for (int k = 1; k < N; ++k) {
        double m = a[static_cast<std::size_t>(k)] / b[static_cast<std::size_t>(k - 1)];
        b[static_cast<std::size_t>(k)] -= m * c[static_cast<std::size_t>(k - 1)];
        rhs[static_cast<std::size_t>(k)] -= m * rhs[static_cast<std::size_t>(k - 1)];
    }
    std::vector<double> g(static_cast<std::size_t>(N), 0.0);
    g[static_cast<std::size_t>(N - 1)] = rhs[static_cast<std::size_t>(N - 1)] / b[static_cast<std::size_t>(N - 1)];
    for (int k = N - 2; k >= 0; --k)
        g[static_cast<std::size_t>(k)] =
            (rhs[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k + 1)]) /
            b[static_cast<std::size_t>(k)];
    return g[static_cast<std::size_t>(from)];
}

HarmonicExtension::HarmonicExtension(std::shared_ptr<const TreeBoundary> boundary, TestFunction phi)
    : boundary_(std::move(boundary)), phi_(std::move(phi)) {
    if (!boundary_) throw std::invalid_argument("harmonic extension needs a boundary");
}

double HarmonicExtension::operator()(Vertex x) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(x);
        if (it != cache_.end()) return it->second;
    }
    double v = 0.0;
    for (const auto& [anchor, coeff] : phi_.cylinders) v += coeff * boundary_->cylinder(x, anchor);
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.emplace(x, v);
    return v;
}

double subtree_indicator_extension(const Space& space, const TestFunction& phi, Vertex x) {
    double v = 0.0;
    const auto& c = space.codec();
    for (const auto& [anchor, coeff] : phi.cylinders)
        if (c.common_prefix(x, anchor) == c.len(anchor)) v += coeff;
    return v;
}

std::vector<double> green_column_truncated(const Space& space, const TruncatedSpace& trunc,
                                           Vertex target) {
    auto it = trunc.index.find(target);
    if (it == trunc.index.end() || trunc.is_front(it->second))
        throw std::invalid_argument("target must be an interior vertex of the truncation");
    std::size_t n = trunc.interior_count;
    if (n > 3000) throw std::length_error("dense Green solve limited to 3000 interior vertices");
    std::vector<double> A(n * n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        A[i * n + i] = 1.0;
        for (const auto& [j, p] : trunc.rows[i])
            if (j < n) A[i * n + j] -= p;
    }
    rhs[it->second] = 1.0;
    // Gaussian elimination with partial pivoting
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(A[r * n + col]) > std::fabs(A[piv * n + col])) piv = r;
        if (piv != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(A[col * n + k], A[piv * n + k]);
            std::swap(rhs[col], rhs[piv]);
        }
        double d = A[col * n + col];
        if (std::fabs(d) < 1e-300) throw std::runtime_error("singular truncation system");
        for (std::size_t r = col + 1; r < n; ++r) {
            double m = A[r * n + col] / d;
            if (m == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) A[r * n + k] -= m * A[col * n + k];
            rhs[r] -= m * rhs[col];
        }
    }
    std::vector<double> g(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= A[i * n + k] * g[k];
        g[i] = acc / A[i * n + i];
    }
    return g;
}

double spectral_radius_truncated(const TruncatedSpace& trunc, int iters) {
    std::size_t n = trunc.interior_count;
    std::vector<double> v(n, 1.0), w(n, 0.0);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const auto& [j, p] : trunc.rows[i])
                if (j < n) acc += p * v[j];
            w[i] = acc;
            norm = std::max(norm, acc);
        }
        if (norm <= 0.0) return 0.0;
        lambda = norm;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    }
    return lambda;
}

}  // namespace bmc
