#include "bmc/studies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>
#include <unordered_map>

#include "bmc/laplace.hpp"
#include "bmc/rational.hpp"

namespace bmc {

namespace {

struct Stats {
    double mean = 0.0, var = 0.0, se = 0.0;
    std::int64_t n = 0;
};

Stats stats_of(const std::vector<double>& xs) {
    Stats s;
    s.n = static_cast<std::int64_t>(xs.size());
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    for (double x : xs) s.var += (x - s.mean) * (x - s.mean);
    s.var = s.n > 1 ? s.var / static_cast<double>(s.n - 1) : 0.0;
    s.se = std::sqrt(s.var / static_cast<double>(s.n));
    return s;
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    double pos = q * static_cast<double>(xs.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

double fixture_number(const ordered_json& fixtures, const char* section, const char* key,
                      double fallback) {
    if (fixtures.contains(section) && fixtures[section].contains(key))
        return fixtures[section][key].get<double>();
    return fallback;
}

RunSpec base_spec(const StudyConfig& cfg) {
    RunSpec spec;
    spec.law = cfg.law;
    spec.initial = cfg.initial;
    spec.horizon = cfg.horizon;
    spec.trajectories = cfg.trajectories;
    spec.cap = cfg.cap;
    spec.seed = cfg.seed;
    spec.threads = cfg.threads;
    spec.engine = cfg.engine;
    spec.watched = cfg.watched;
    return spec;
}

void finish(StudyReport& rep, const StudyConfig& cfg, const char* name) {
    rep.study = name;
    rep.seed = cfg.seed;
    rep.config_echo = cfg.echo;
}

ordered_json verdict_json(const Verdict& v) {
    ordered_json j;
    j["name"] = v.name;
    j["pass"] = v.pass;
    j["value"] = v.value;
    j["threshold"] = v.threshold;
    j["detail"] = v.detail;
    return j;
}

std::vector<Vertex> enumerate_ball(const Space& space, int radius) {
    std::vector<Vertex> out{space.root()};
    std::vector<std::pair<Vertex, double>> nbrs;
    std::size_t head = 0;
    std::vector<int> depth{0};
    std::unordered_map<Vertex, bool> seen{{space.root(), true}};
    while (head < out.size()) {
        Vertex v = out[head];
        int dv = depth[head];
        ++head;
        if (dv == radius) continue;
        space.neighbors(v, nbrs);
        for (const auto& [w, p] : nbrs) {
            if (seen.emplace(w, true).second) {
                out.push_back(w);
                depth.push_back(dv + 1);
            }
        }
    }
    return out;
}

// Envelope over the law's offspring family, shared by several studies.
EnvelopeResult law_envelope(const BranchingLaw& law) { return envelope(law.pmf_family()); }

}  // namespace

bool StudyReport::all_pass() const {
    for (const auto& v : verdicts)
        if (!v.pass) return false;
    return true;
}

ordered_json StudyReport::to_json() const {
    ordered_json j;
    j["study"] = study;
    j["seed"] = seed;
    j["config"] = config_echo;
    ordered_json vj = ordered_json::array();
    for (const auto& v : verdicts) vj.push_back(verdict_json(v));
    j["verdicts"] = vj;
    j["counts"] = {{"trajectories", trajectories}, {"truncated", truncated}};
    j["data"] = data;
    return j;
}

// ---------------------------------------------------------------------------
// martingale_study
// ---------------------------------------------------------------------------

StudyReport martingale_study(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "martingale");
    double rho = cfg.law->rho();
    auto env = law_envelope(*cfg.law);
    if (!env.ok) throw std::invalid_argument("offspring family has no dominating envelope: " + env.failure);

    auto res = run(base_spec(cfg));
    rep.trajectories = cfg.trajectories;
    rep.truncated = res.truncated_count;
    double w0 = static_cast<double>(cfg.initial.total());

    // per-n statistics over untruncated trajectories
    std::string csv = "n,mean_w,var_w,se_w,median_w,q05,q25,q75,q95,frac_below_eps\n";
    char buf[512];
    std::vector<double> median_by_n(static_cast<std::size_t>(cfg.horizon) + 1, 0.0);
    ordered_json curve = ordered_json::array();
    for (int n = 0; n <= cfg.horizon; ++n) {
        std::vector<double> ws;
        for (const auto& tr : res.trajectories) {
            if (tr.truncated) continue;
            ws.push_back(tr.steps[static_cast<std::size_t>(n)].w);
        }
        auto st = stats_of(ws);
        double med = quantile(ws, 0.5);
        median_by_n[static_cast<std::size_t>(n)] = med;
        double below = 0.0;
        for (double w : ws) below += w < cfg.epsilon ? 1.0 : 0.0;
        below = ws.empty() ? 0.0 : below / static_cast<double>(ws.size());
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      n, st.mean, st.var, st.se, med, quantile(ws, 0.05), quantile(ws, 0.25),
                      quantile(ws, 0.75), quantile(ws, 0.95), below);
        csv += buf;
        curve.push_back({{"n", n}, {"mean_w", st.mean}, {"se_w", st.se}, {"median_w", med},
                         {"frac_below_eps", below}});
    }
    rep.curves_csv = csv;

    std::vector<double> terminal;
    for (const auto& tr : res.trajectories)
        if (!tr.truncated) terminal.push_back(tr.steps.back().w);
    auto st = stats_of(terminal);

    double frac_trunc = static_cast<double>(res.truncated_count) / static_cast<double>(cfg.trajectories);
    rep.verdicts.push_back({"truncated_fraction_within_limit", frac_trunc <= cfg.truncated_fraction_limit,
                            frac_trunc, cfg.truncated_fraction_limit, "truncated / total"});

    if (!env.llogl.divergent) {
        rep.verdicts.push_back({"uniform_llogl_finite", true, env.llogl.value, 0.0,
                                "dominating pmf " + env.pmf.describe()});
        double dev = std::fabs(st.mean - w0);
        rep.verdicts.push_back({"mean_w_horizon_within_3se", dev < 3.0 * st.se, dev, 3.0 * st.se,
                                "|mean W_N - ||M_0||| vs 3*SE"});
    } else {
        rep.verdicts.push_back({"llogl_divergent_flagged", true, env.llogl.value, 0.0,
                                "dominating pmf " + env.pmf.describe() + ", k log k mass divergent"});
        int from = std::min(cfg.median_decline_from, cfg.horizon);
        double early = median_by_n[static_cast<std::size_t>(from)];
        double late = median_by_n[static_cast<std::size_t>(cfg.horizon)];
        rep.verdicts.push_back({"median_w_declines", late < early, late, early,
                                "median W at n=" + std::to_string(cfg.horizon) + " vs n=" +
                                    std::to_string(from)});
    }

    rep.data["mean_w_horizon"] = st.mean;
    rep.data["se_w_horizon"] = st.se;
    rep.data["per_n"] = curve;
    rep.data["terminal_w"] = terminal;
    return rep;
}

// ---------------------------------------------------------------------------
// positivity_study
// ---------------------------------------------------------------------------

StudyReport positivity_study(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "positivity");
    auto env = law_envelope(*cfg.law);
    if (!env.ok) throw std::invalid_argument("offspring family has no dominating envelope: " + env.failure);
    rep.verdicts.push_back({"uniform_llogl_finite", !env.llogl.divergent, env.llogl.value, 0.0,
                            "dominating pmf " + env.pmf.describe()});

    double omega[4] = {0, 0, 0, 0};
    double se[4] = {0, 0, 0, 0};
    double min_w = 1e300;
    ordered_json per_k = ordered_json::array();
    for (int k = 1; k <= 3; ++k) {
        RunSpec spec = base_spec(cfg);
        Population init = cfg.initial;
        for (int j = 1; j < k; ++j) init = init.merge(cfg.initial);
        spec.initial = init;
        spec.seed = Rng::substream(cfg.seed, 1000 + static_cast<std::uint64_t>(k)).key;
        auto res = run(spec);
        std::int64_t below = 0, total = 0;
        for (const auto& tr : res.trajectories) {
            if (tr.truncated) continue;
            double w = tr.steps.back().w;
            min_w = std::min(min_w, w);
            below += w < cfg.epsilon ? 1 : 0;
            ++total;
        }
        omega[k] = total > 0 ? static_cast<double>(below) / static_cast<double>(total) : 0.0;
        se[k] = total > 0 ? std::sqrt(omega[k] * (1.0 - omega[k]) / static_cast<double>(total)) : 0.0;
        rep.trajectories += cfg.trajectories;
        rep.truncated += res.truncated_count;
        per_k.push_back({{"initial_mass", k * cfg.initial.total()},
                         {"omega_hat", omega[k]},
                         {"se", se[k]},
                         {"seed", spec.seed},
                         {"untruncated", total}});
    }

    rep.verdicts.push_back({"min_w_positive", min_w > 0.0, min_w, 0.0,
                            "smallest terminal W across all runs (NE forces >= rho^-N)"});
    double inv_t = 1.0 / static_cast<double>(cfg.trajectories);
    for (int k = 2; k <= 3; ++k) {
        double target = std::pow(omega[1], k);
        double band = 3.0 * (se[k] + k * std::pow(omega[1], k - 1) * se[1]) + inv_t;
        double dev = std::fabs(omega[k] - target);
        rep.verdicts.push_back({"omega_multiplicative_k" + std::to_string(k), dev <= band, dev, band,
                                "|omega(k d_x) - omega(d_x)^k| vs delta-method band"});
    }
    rep.verdicts.push_back({"omega_monotone_in_mass",
                            omega[2] <= omega[1] + 3.0 * (se[1] + se[2]) + inv_t,
                            omega[2], omega[1] + 3.0 * (se[1] + se[2]) + inv_t,
                            "omega(2 d_x) <= omega(d_x) within CI"});
    double band_max = fixture_number(cfg.fixtures, "positivity", "frac_below_max", 1.0);
    rep.verdicts.push_back({"frac_below_eps_within_pilot_band", omega[1] <= band_max, omega[1],
                            band_max, "pilot-calibrated ceiling for P[W_N < eps]"});

    rep.data["per_initial_mass"] = per_k;
    rep.data["min_w"] = min_w;
    rep.data["epsilon"] = cfg.epsilon;
    return rep;
}

// ---------------------------------------------------------------------------
// boundary_limit_study
// ---------------------------------------------------------------------------

StudyReport boundary_limit_study(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "boundary");
    if (!cfg.space->is_word_space())
        throw std::invalid_argument("boundary study needs a tree / free-group space");
    if (cfg.phi.cylinders.empty())
        throw std::invalid_argument("boundary study needs a registered test function");
    auto env = law_envelope(*cfg.law);
    rep.verdicts.push_back({"uniform_llogl_finite", env.ok && !env.llogl.divergent,
                            env.ok ? env.llogl.value : 0.0, 0.0, "precondition for Thm-level verdicts"});

    auto boundary = std::make_shared<TreeBoundary>(cfg.space);
    if (!boundary->transient()) throw std::invalid_argument("boundary study needs a transient kernel");
    HarmonicExtension fphi(boundary, cfg.phi);
    double rho = cfg.law->rho();

    // precompute both extensions over the reachable ball; the run then only
    // does hash lookups
    int max_init_depth = 0;
    for (const auto& [v, c] : cfg.initial.entries())
        max_init_depth = std::max(max_init_depth, cfg.space->codec().len(v));
    auto ball = enumerate_ball(*cfg.space, max_init_depth + cfg.horizon);
    auto fmap = std::make_shared<std::unordered_map<Vertex, double>>();
    auto gmap = std::make_shared<std::unordered_map<Vertex, double>>();
    fmap->reserve(ball.size());
    gmap->reserve(ball.size());
    for (Vertex v : ball) {
        fmap->emplace(v, fphi(v));
        gmap->emplace(v, subtree_indicator_extension(*cfg.space, cfg.phi, v));
    }

    RunSpec spec = base_spec(cfg);
    spec.functionals = {[fmap](Vertex v) { return fmap->at(v); },
                        [gmap](Vertex v) { return gmap->at(v); }};
    auto res = run(spec);
    rep.trajectories = cfg.trajectories;
    rep.truncated = res.truncated_count;

    double phi_norm = 0.0;
    for (const auto& [a, cf] : cfg.phi.cylinders) phi_norm += std::fabs(cf);

    std::vector<double> a_terminal, gaps, bc_gaps;
    double domination_excess = 0.0;
    std::vector<double> mean_a(static_cast<std::size_t>(cfg.horizon) + 1, 0.0);
    std::vector<double> mean_b(mean_a.size(), 0.0), mean_c(mean_a.size(), 0.0);
    std::int64_t used = 0;
    for (const auto& tr : res.trajectories) {
        if (tr.truncated) continue;
        ++used;
        std::vector<double> a(tr.steps.size());
        for (std::size_t n = 0; n < tr.steps.size(); ++n) {
            const auto& s = tr.steps[n];
            double rp = std::pow(rho, static_cast<double>(n));
            a[n] = s.functionals[0] / rp;
            double b = s.functionals[1] / static_cast<double>(s.pop_size);
            double c = s.functionals[0] / static_cast<double>(s.pop_size);
            mean_a[n] += a[n];
            mean_b[n] += b;
            mean_c[n] += c;
            domination_excess = std::max(domination_excess, std::fabs(a[n]) - s.w * phi_norm);
            if (n + 1 == tr.steps.size()) {
                a_terminal.push_back(a[n]);
                bc_gaps.push_back(std::fabs(b - c));
            }
        }
        double gap = 0.0;
        for (std::size_t n = tr.steps.size() >= 5 ? tr.steps.size() - 5 : 0; n < tr.steps.size(); ++n)
            gap = std::max(gap, std::fabs(a[n] - a.back()));
        gaps.push_back(gap);
    }
    for (std::size_t n = 0; n < mean_a.size(); ++n) {
        mean_a[n] /= static_cast<double>(used);
        mean_b[n] /= static_cast<double>(used);
        mean_c[n] /= static_cast<double>(used);
    }

    auto st = stats_of(a_terminal);
    double target = fphi(cfg.x0);
    double dev = std::fabs(st.mean - target);
    rep.verdicts.push_back({"mean_a_horizon_within_3se", dev < 3.0 * st.se, dev, 3.0 * st.se,
                            "|mean a_N - <kappa_x0, phi>| vs 3*SE"});

    double gap_p95 = quantile(gaps, 0.95);
    double gap_band = fixture_number(cfg.fixtures, "boundary", "cauchy_gap_p95_max", 1.0);
    rep.verdicts.push_back({"cauchy_gap_p95_within_pilot_band", gap_p95 <= gap_band, gap_p95,
                            gap_band, "p95 of max_{last 5 n} |a_n - a_N|"});

    double bc_tol = fixture_number(cfg.fixtures, "boundary", "bc_gap", 0.05);
    double bc_frac_min = fixture_number(cfg.fixtures, "boundary", "bc_frac_min", 0.95);
    double ok = 0.0;
    for (double g : bc_gaps) ok += g < bc_tol ? 1.0 : 0.0;
    ok = bc_gaps.empty() ? 0.0 : ok / static_cast<double>(bc_gaps.size());
    rep.verdicts.push_back({"empirical_vs_average_pairing", ok >= bc_frac_min, ok, bc_frac_min,
                            "fraction of |b_N - c_N| < " + std::to_string(bc_tol)});

    rep.verdicts.push_back({"a_dominated_by_w_exact", domination_excess <= 1e-12, domination_excess,
                            1e-12, "|a_n| <= W_n * |phi| on every recorded step"});

    ordered_json curve = ordered_json::array();
    std::string csv = "n,mean_a,mean_b,mean_c\n";
    char buf[256];
    for (std::size_t n = 0; n < mean_a.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", n, mean_a[n], mean_b[n], mean_c[n]);
        csv += buf;
        curve.push_back({{"n", n}, {"mean_a", mean_a[n]}, {"mean_b", mean_b[n]}, {"mean_c", mean_c[n]}});
    }
    rep.curves_csv = csv;
    rep.data["per_n"] = curve;
    rep.data["harmonic_value_at_x0"] = target;
    rep.data["terminal_a"] = a_terminal;
    rep.data["cauchy_gap_p95"] = gap_p95;
    rep.data["bc_gap_p95"] = quantile(bc_gaps, 0.95);
    return rep;
}

// ---------------------------------------------------------------------------
// disappear_study
// ---------------------------------------------------------------------------

StudyReport disappear_study(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "disappear");
    if (cfg.watched.empty()) throw std::invalid_argument("disappear study needs watched states");
    double rho = cfg.law->rho();

    auto boundary = std::make_shared<TreeBoundary>(cfg.space);
    auto res = run(base_spec(cfg));
    rep.trajectories = cfg.trajectories;
    rep.truncated = res.truncated_count;

    ordered_json per_state = ordered_json::array();
    for (std::size_t wi = 0; wi < cfg.watched.size(); ++wi) {
        Vertex y = cfg.watched[wi];
        double g = boundary->green(cfg.x0, y);
        std::vector<double> s_vals;
        std::vector<std::vector<double>> occupation(static_cast<std::size_t>(cfg.horizon) + 1);
        for (const auto& tr : res.trajectories) {
            if (tr.truncated) continue;
            double s = 0.0;
            double rp = 1.0;
            for (std::size_t n = 0; n < tr.steps.size(); ++n) {
                double cnt = static_cast<double>(tr.steps[n].watched[wi]);
                s += cnt / rp;
                rp *= rho;
                occupation[n].push_back(cnt / static_cast<double>(tr.steps[n].pop_size));
            }
            s_vals.push_back(s);
        }
        auto st = stats_of(s_vals);
        double rel = std::fabs(st.mean - g) / g;
        rep.verdicts.push_back({"mean_discounted_visits_near_green_" + cfg.space->vertex_name(y),
                                rel < 0.05, rel, 0.05,
                                "relative gap of mean sum rho^-n M_n(y) to G(x0,y)"});
        // median empirical occupation declines from its first positive step
        std::size_t n_star = 0;
        double early = 0.0;
        for (std::size_t n = 1; n < occupation.size(); ++n) {
            double med = quantile(occupation[n], 0.5);
            if (med > 0.0) {
                n_star = n;
                early = med;
                break;
            }
        }
        double late = quantile(occupation.back(), 0.5);
        rep.verdicts.push_back({"median_occupation_declines_" + cfg.space->vertex_name(y),
                                n_star > 0 && late < early, late, early,
                                "median M_n(y)/||M_n|| at N vs first positive step n=" +
                                    std::to_string(n_star)});
        per_state.push_back({{"state", cfg.space->vertex_name(y)},
                             {"green", g},
                             {"mean_s", st.mean},
                             {"se_s", st.se},
                             {"relative_gap", rel}});
    }
    rep.data["per_state"] = per_state;
    return rep;
}

// ---------------------------------------------------------------------------
// gw_boundary_study
// ---------------------------------------------------------------------------

StudyReport gw_boundary_study(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "gw");
    if (cfg.space->is_word_space() || cfg.space->state_count() != 1)
        throw std::invalid_argument("the Galton-Watson study runs on the singleton state space");
    double rho = cfg.law->rho();
    bool rho_pow2 = rho == 2.0 || rho == 4.0 || rho == 8.0;

    auto res = run(base_spec(cfg));
    rep.trajectories = cfg.trajectories;
    rep.truncated = res.truncated_count;

    // exact shift identity on every recorded pair of steps
    double shift_worst = 0.0;
    for (const auto& tr : res.trajectories) {
        for (std::size_t n = 0; n + 1 < tr.steps.size(); ++n) {
            double shifted = static_cast<double>(tr.steps[n + 1].pop_size) /
                             std::pow(rho, static_cast<double>(n));
            shift_worst = std::max(shift_worst, std::fabs(shifted - rho * tr.steps[n + 1].w));
        }
    }
    rep.verdicts.push_back({"shift_identity_exact", rho_pow2 ? shift_worst == 0.0 : shift_worst < 1e-12,
                            shift_worst, 0.0, "W_n(shifted path) - rho W_{n+1}, every step"});

    std::vector<double> terminal, coords;
    bool coord_in_range = true;
    for (const auto& tr : res.trajectories) {
        if (tr.truncated) continue;
        double w = tr.steps.back().w;
        terminal.push_back(w);
        double lg = std::log(w) / std::log(rho);
        double frac = lg - std::floor(lg);
        double coord = std::pow(rho, frac);
        coords.push_back(coord);
        if (!(coord >= 1.0 && coord < rho)) coord_in_range = false;
    }
    rep.verdicts.push_back({"poisson_coordinate_in_fundamental_interval", coord_in_range,
                            coord_in_range ? 1.0 : 0.0, 1.0, "rho^{frac(log_rho W_N)} in [1, rho)"});

    double lo = fixture_number(cfg.fixtures, "gw", "w_bins_lo", 0.1);
    double hi = fixture_number(cfg.fixtures, "gw", "w_bins_hi", 3.0);
    int bins = static_cast<int>(fixture_number(cfg.fixtures, "gw", "w_bins", 10));
    std::vector<std::int64_t> hist(static_cast<std::size_t>(bins), 0);
    for (double w : terminal) {
        if (w < lo || w >= hi) continue;
        auto b = static_cast<std::size_t>((w - lo) / (hi - lo) * bins);
        hist[std::min(b, hist.size() - 1)]++;
    }
    std::vector<std::int64_t> coord_hist(10, 0);
    for (double c : coords) {
        auto b = static_cast<std::size_t>((c - 1.0) / (rho - 1.0) * 10.0);
        coord_hist[std::min(b, coord_hist.size() - 1)]++;
    }
    if (cfg.histogram_verdicts) {
        std::int64_t min_bin = *std::min_element(hist.begin(), hist.end());
        rep.verdicts.push_back({"w_histogram_positive_in_all_deciles", min_bin > 0,
                                static_cast<double>(min_bin), 1.0,
                                "decile counts of W_N over [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + ")"});
        std::int64_t min_cb = *std::min_element(coord_hist.begin(), coord_hist.end());
        rep.verdicts.push_back({"coordinate_positive_in_all_deciles", min_cb > 0,
                                static_cast<double>(min_cb), 1.0,
                                "decile counts of the Poisson coordinate over [1, rho)"});
    }
    rep.data["terminal_w"] = terminal;
    rep.data["w_histogram"] = hist;
    rep.data["coordinate_histogram"] = coord_hist;
    rep.data["w_median"] = quantile(terminal, 0.5);
    return rep;
}

// ---------------------------------------------------------------------------
// inequality_checks
// ---------------------------------------------------------------------------

StudyReport inequality_checks(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "inequalities");
    if (cfg.s_grid.empty()) throw std::invalid_argument("inequality checks need an s grid");
    double rho = cfg.law->rho();
    auto env = law_envelope(*cfg.law);
    if (!env.ok) throw std::invalid_argument("no dominating envelope: " + env.failure);
    if (env.llogl.divergent)
        throw std::invalid_argument("inequality checks need a finite k log k envelope");
    LaplaceToolkit toolkit(env.pmf);
    double s0 = toolkit.s0(rho);
    for (double s : cfg.s_grid)
        if (!(s > 0.0 && s <= s0 + 1e-12))
            throw std::invalid_argument("s grid point outside (0, s0]; s0 = " + std::to_string(s0));

    // (i) exact one-step transform inequality for small initial populations.
    // For an initial delta at m the left side is the product of the particle
    // transforms; the bound is G_Theta(rho s) + ||m|| R(s).
    double worst_violation = -1e300;
    double strictness_at_mid = 0.0;
    ordered_json exact_rows = ordered_json::array();
    for (int copies = 1; copies <= 3; ++copies) {
        Population m = cfg.initial;
        for (int j = 1; j < copies; ++j) m = m.merge(cfg.initial);
        for (double s : cfg.s_grid) {
            double lhs = 1.0;
            for (const auto& [x, c] : m.entries())
                lhs *= std::pow(cfg.law->offspring_at(x).laplace(s), static_cast<double>(c));
            double rhs = std::exp(-rho * s * static_cast<double>(m.total())) +
                         static_cast<double>(m.total()) * toolkit.R(s);
            worst_violation = std::max(worst_violation, lhs - rhs);
            if (copies == 1) {
                exact_rows.push_back({{"s", s}, {"lhs", lhs}, {"rhs", rhs}});
                strictness_at_mid = std::max(strictness_at_mid, rhs - lhs);
            }
        }
    }
    rep.verdicts.push_back({"pipe_inequality_exact", worst_violation <= 1e-12, worst_violation,
                            1e-12, "max over grid and small populations of LHS - RHS"});

    // (ii) Monte Carlo horizon transform against the telescoped bound.
    auto res = run(base_spec(cfg));
    rep.trajectories = cfg.trajectories;
    rep.truncated = res.truncated_count;
    ordered_json mc_rows = ordered_json::array();
    bool mc_ok = true;
    double log_rho = std::log(rho);
    for (double s : cfg.s_grid) {
        std::vector<double> vals;
        for (const auto& tr : res.trajectories) {
            if (tr.truncated) continue;
            vals.push_back(std::exp(-s * tr.steps.back().w));
        }
        auto st = stats_of(vals);
        // the lower integration end is cut at s*1e-12; the omitted piece is
        // O(s * 1e-12) for any finite-k-log-k envelope
        double integral = toolkit.remainder_integral(s * 1e-12, s, 1e-12);
        double rhs = std::exp(-s) + s / (rho * log_rho) * integral;
        bool ok = st.mean <= rhs + 3.0 * st.se;
        mc_ok = mc_ok && ok;
        mc_rows.push_back({{"s", s}, {"mc_mean", st.mean}, {"mc_se", st.se}, {"bound", rhs},
                           {"pass", ok}});
    }
    rep.verdicts.push_back({"telescoped_bound_monte_carlo", mc_ok, mc_ok ? 1.0 : 0.0, 1.0,
                            "E[e^{-s W_N}] <= e^{-s} + s/(rho ln rho) int_0^s R/sigma^2 + 3*SE"});

    rep.data["s0"] = s0;
    rep.data["exact"] = exact_rows;
    rep.data["monte_carlo"] = mc_rows;
    rep.data["strictness_at_grid"] = strictness_at_mid;
    return rep;
}

// ---------------------------------------------------------------------------
// invariant_check
// ---------------------------------------------------------------------------

StudyReport invariant_check(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "check");
    Rng rng(cfg.seed);
    const Space& sp = *cfg.space;

    {  // kernel rows on a sample of visited vertices
        double worst = 0.0;
        Vertex x = sp.root();
        for (int i = 0; i < 200; ++i) {
            double s = 0.0;
            for (auto [v, p] : sp.neighbors(x)) s += p;
            worst = std::max(worst, std::fabs(s - 1.0));
            if (i % 25 == 24) x = sp.root();
            else x = sp.sample_step(x, rng);
        }
        rep.verdicts.push_back({"kernel_rows_sum_to_one", worst < 1e-12, worst, 1e-12, "visited sample"});
    }
    if (sp.is_word_space()) {
        bool ok = true;
        for (int rep_i = 0; rep_i < 200 && ok; ++rep_i) {
            std::vector<int> letters;
            int len = static_cast<int>(rng.below(64)) + 1;
            for (int i = 0; i < len; ++i)
                letters.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(sp.degree()))));
            auto once = sp.codec().reduce_letters(letters);
            ok = once == sp.codec().reduce_letters(once);
        }
        rep.verdicts.push_back({"reduction_idempotent", ok, ok ? 1.0 : 0.0, 1.0, "random strings <= 64"});
    }
    {  // triangle inequality
        bool ok = true;
        auto rand_vertex = [&] {
            Vertex v = sp.root();
            for (int j = 0; j < static_cast<int>(rng.below(8)); ++j) v = sp.sample_step(v, rng);
            return v;
        };
        for (int i = 0; i < 200 && ok; ++i) {
            Vertex a = rand_vertex(), b = rand_vertex(), c = rand_vertex();
            ok = sp.distance(a, c) <= sp.distance(a, b) + sp.distance(b, c);
        }
        rep.verdicts.push_back({"distance_triangle_inequality", ok, ok ? 1.0 : 0.0, 1.0, "random triples"});
    }
    {  // lift / merge algebra and exact-rational empirical masses
        auto rand_pop = [&] {
            std::vector<Population::Entry> e;
            int k = static_cast<int>(rng.below(5)) + 1;
            for (int i = 0; i < k; ++i) {
                Vertex v = sp.root();
                for (int j = 0; j < static_cast<int>(rng.below(4)); ++j) v = sp.sample_step(v, rng);
                e.emplace_back(v, static_cast<std::int64_t>(rng.below(7)) + 1);
            }
            return Population::from_pairs(e);
        };
        bool ok = true;
        for (int i = 0; i < 100 && ok; ++i) {
            auto a = rand_pop(), b = rand_pop();
            auto f = [](Vertex v) { return static_cast<double>(v % 31) * 0.5 - 3.0; };
            ok = a.merge(b).total() == a.total() + b.total() &&
                 std::fabs(a.merge(b).lift(f) - a.lift(f) - b.lift(f)) < 1e-9;
            Rational sum(0);
            for (const auto& [v, r] : a.empirical_exact()) sum = sum + r;
            ok = ok && sum == Rational(1);
        }
        rep.verdicts.push_back({"population_algebra_exact", ok, ok ? 1.0 : 0.0, 1.0,
                                "merge additivity, lift linearity, rational empirical"});
    }
    if (sp.is_word_space()) {
        TreeBoundary b(cfg.space);
        if (b.transient()) {
            double worst = 0.0;
            auto ball = enumerate_ball(sp, 4);
            auto anchors = b.anchors_to_depth(3);
            for (Vertex x : ball)
                for (Vertex a : anchors) {
                    double lhs = b.cylinder(x, a);
                    double rhs = 0.0;
                    for (auto [y, p] : sp.neighbors(x)) rhs += p * b.cylinder(y, a);
                    worst = std::max(worst, std::fabs(lhs - rhs));
                }
            rep.verdicts.push_back({"hitting_measure_stationarity", worst < 1e-10, worst, 1e-10,
                                    "radius-4 ball, cylinders to depth 3"});
            double part_worst = 0.0;
            for (int depth = 1; depth <= 4; ++depth) {
                double sum = 0.0;
                for (Vertex a : b.anchors_to_depth(depth))
                    if (sp.codec().len(a) == depth) sum += b.cylinder(sp.root(), a);
                part_worst = std::max(part_worst, std::fabs(sum - 1.0));
            }
            rep.verdicts.push_back({"cylinder_partition_of_unity", part_worst < 1e-10, part_worst,
                                    1e-10, "depth 1..4 shadows partition the boundary"});
        }
    }
    {  // commutation: closed form vs enumeration
        auto law = BranchingLaw(cfg.space, BranchingLaw::Mode::independent,
                                OffspringPMF::explicit_pmf({{1, 0.5}, {2, 0.5}}));
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            Vertex v = sp.root();
            for (int j = 0; j < static_cast<int>(rng.below(3)); ++j) v = sp.sample_step(v, rng);
            auto m = Population::singleton(v, static_cast<std::int64_t>(rng.below(3)) + 1);
            auto f = [](Vertex x) { return static_cast<double>(x % 17) * 0.25 - 1.0; };
            auto e = exact_step_expectation(m, f, law);
            worst = std::max(worst, std::fabs(e.closed_form - e.enumeration));
        }
        rep.verdicts.push_back({"one_step_commutation", worst < 1e-12, worst, 1e-12,
                                "sum m(x) rho Pf(x) vs exhaustive enumeration"});
    }
    {  // shift identity on a short Galton-Watson run
        auto gw_space = std::make_shared<Space>(Space::explicit_kernel({"o"}, {{1.0}}));
        RunSpec spec;
        spec.law = std::make_shared<BranchingLaw>(gw_space, BranchingLaw::Mode::independent,
                                                  OffspringPMF::geometric(0.5));
        spec.initial = Population::singleton(gw_space->root());
        spec.horizon = 12;
        spec.trajectories = 50;
        spec.seed = cfg.seed;
        auto res = run(spec);
        double worst = 0.0;
        for (const auto& tr : res.trajectories) {
            if (tr.truncated) continue;
            for (std::size_t n = 0; n + 1 < tr.steps.size(); ++n) {
                double shifted = static_cast<double>(tr.steps[n + 1].pop_size) /
                                 std::pow(2.0, static_cast<double>(n));
                worst = std::max(worst, std::fabs(shifted - 2.0 * tr.steps[n + 1].w));
            }
        }
        rep.verdicts.push_back({"shift_identity_exact", worst == 0.0, worst, 0.0,
                                "W_n(shift) = rho W_{n+1}, power-of-two rho"});
    }
    rep.trajectories = 0;
    rep.data["note"] = "exact identity suite";
    return rep;
}

// ---------------------------------------------------------------------------
// green_report
// ---------------------------------------------------------------------------

StudyReport green_report(const StudyConfig& cfg) {
    StudyReport rep;
    finish(rep, cfg, "green");
    if (!cfg.space->is_word_space()) {
        // explicit kernels: truncation-relative Green table
        auto trunc = cfg.space->truncate(cfg.depth, 1);
        ordered_json rows = ordered_json::array();
        auto col = green_column_truncated(*cfg.space, trunc, cfg.x0);
        for (std::size_t i = 0; i < trunc.interior_count; ++i)
            rows.push_back({{"from", cfg.space->vertex_name(trunc.verts[i])},
                            {"to", cfg.space->vertex_name(cfg.x0)},
                            {"green_truncated", col[i]}});
        rep.data["truncation_radius"] = trunc.radius;
        rep.data["table"] = rows;
        rep.data["spectral_radius_truncated"] = spectral_radius_truncated(trunc);
        return rep;
    }
    auto b = TreeBoundary(cfg.space);
    if (!b.transient()) throw std::invalid_argument("green report needs a transient kernel");
    Vertex o = cfg.space->root();
    double goo = b.green(o, o);
    ordered_json rows = ordered_json::array();
    rows.push_back({{"from", "o"}, {"to", "o"}, {"green", goo}, {"martin", b.martin(o, o)}});
    double worst_oracle_gap = 0.0;
    if (b.isotropic()) {
        worst_oracle_gap = std::fabs(goo - b.green_radial_truncated(0, 0, 60));
        for (auto [y, p] : cfg.space->neighbors(o)) {
            double gy = b.green(o, y);
            if (cfg.space->step_law().kind == StepLaw::Kind::simple)
                worst_oracle_gap = std::max(worst_oracle_gap,
                                            std::fabs(gy - b.green_radial_truncated(1, 0, 60)));
            rows.push_back({{"from", "o"}, {"to", cfg.space->vertex_name(y)}, {"green", gy},
                            {"martin", b.martin(o, y)}});
        }
        rep.verdicts.push_back({"green_matches_truncation_oracle", worst_oracle_gap < 1e-8,
                                worst_oracle_gap, 1e-8, "radial linear solve at radius 60"});
        auto est = b.spectral_radius(2000);
        rep.data["spectral_radius"] = est.value;
        rep.data["spectral_radius_bracket"] = {est.lower, est.upper};
        rep.verdicts.push_back({"spectral_radius_bracketed", est.upper - est.lower < 1e-2,
                                est.upper - est.lower, 1e-2, "bracket width at n_max = 2000"});
    }
    // defining relation: (I - P) G(., y) = delta_y on a sample of vertices
    double residual = 0.0;
    auto ball = enumerate_ball(*cfg.space, 3);
    for (Vertex x : ball) {
        double lhs = b.green(x, o);
        double rhs = 0.0;
        for (auto [w, p] : cfg.space->neighbors(x)) rhs += p * b.green(w, o);
        residual = std::max(residual, std::fabs(lhs - rhs - (x == o ? 1.0 : 0.0)));
    }
    rep.verdicts.push_back({"green_defining_relation", residual < 1e-10, residual, 1e-10,
                            "(I-P) G(., o) = delta_o on a radius-3 ball"});
    rep.data["table"] = rows;
    return rep;
}

}  // namespace bmc
