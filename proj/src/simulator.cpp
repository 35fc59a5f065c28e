#include "bmc/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

#include "bmc/sampling.hpp"

namespace bmc {

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BMC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

double pow_int(double base, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= base;
    return r;
}

StepStats make_stats(int n, const Population& m, double rho_pow_n, const RunSpec& spec) {
    StepStats s;
    s.n = n;
    s.pop_size = m.total();
    s.w = static_cast<double>(m.total()) / rho_pow_n;
    s.distinct_sites = static_cast<std::int64_t>(m.distinct_sites());
    s.watched.reserve(spec.watched.size());
    for (Vertex y : spec.watched) s.watched.push_back(m.count(y));
    s.functionals.reserve(spec.functionals.size());
    for (const auto& f : spec.functionals) s.functionals.push_back(m.lift(f));
    return s;
}

TrajectoryResult run_general(const RunSpec& spec, std::int64_t id, double rho) {
    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(id));
    TrajectoryResult tr;
    tr.id = id;
    Population m = spec.initial;
    double rp = 1.0;
    tr.steps.push_back(make_stats(0, m, rp, spec));
    for (int step_to : spec.snapshot_steps)
        if (step_to == 0) tr.snapshots.emplace_back(0, m);
    using clock = std::chrono::steady_clock;
    for (int n = 1; n <= spec.horizon; ++n) {
        auto t0 = clock::now();
        bool truncated = false;
        Population next = step(m, *spec.law, rng, spec.cap, &truncated);
        rp *= rho;
        if (truncated) {
            tr.truncated = true;
            tr.truncated_at = n;
            StepStats s = make_stats(n, next, rp, spec);
            s.truncated = true;
            tr.steps.push_back(std::move(s));
            return tr;
        }
        m = std::move(next);
        tr.steps.push_back(make_stats(n, m, rp, spec));
        for (int step_to : spec.snapshot_steps)
            if (step_to == n) tr.snapshots.emplace_back(n, m);
        if (spec.step_time_budget_s > 0.0) {
            std::chrono::duration<double> dt = clock::now() - t0;
            if (dt.count() > spec.step_time_budget_s) {
                tr.truncated = true;
                tr.truncated_at = n;
                return tr;
            }
        }
    }
    return tr;
}

// Distance-profile engine. counts[k] = particles at distance k from the root.
TrajectoryResult run_radial(const RunSpec& spec, std::int64_t id, double rho) {
    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(id));
    const Space& sp = spec.law->space();
    int deg = sp.degree();
    double back = sp.step_law().kind == StepLaw::Kind::radial ? sp.step_law().back : 1.0 / deg;

    TrajectoryResult tr;
    tr.id = id;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.horizon) + 2, 0);
    counts[0] = spec.initial.total();

    auto record = [&](int n, double rp, bool trunc) {
        StepStats s;
        s.n = n;
        std::int64_t tot = 0, nz = 0;
        for (std::int64_t c : counts) {
            tot += c;
            nz += c > 0 ? 1 : 0;
        }
        s.pop_size = tot;
        s.w = static_cast<double>(tot) / rp;
        s.distinct_sites = nz;  // occupied distance classes, not sites
        s.truncated = trunc;
        for (Vertex y : spec.watched) {
            (void)y;  // validated to be the root
            s.watched.push_back(counts[0]);
        }
        tr.steps.push_back(std::move(s));
    };

    double rp = 1.0;
    record(0, rp, false);
    std::vector<std::int64_t> next(counts.size(), 0);
    for (int n = 1; n <= spec.horizon; ++n) {
        std::fill(next.begin(), next.end(), 0);
        std::int64_t tot = 0;
        bool truncated = false;
        for (std::size_t k = 0; k < counts.size() && !truncated; ++k) {
            if (counts[k] == 0) continue;
            const OffspringPMF& pmf =
                spec.law->offspring_at_depth(static_cast<std::int64_t>(k));
            std::int64_t brood = pmf.sample_sum(rng, counts[k]);
            tot += brood;
            if (tot > spec.cap) {
                truncated = true;
                break;
            }
            if (k == 0) {
                next[1] += brood;
            } else {
                std::int64_t down = brood < 16
                                        ? [&] {
                                              std::int64_t d = 0;
                                              for (std::int64_t i = 0; i < brood; ++i)
                                                  d += rng.bernoulli(back) ? 1 : 0;
                                              return d;
                                          }()
                                        : binomial(rng, brood, back);
                next[k - 1] += down;
                if (k + 1 < next.size()) next[k + 1] += brood - down;
            }
        }
        rp *= rho;
        if (truncated) {
            tr.truncated = true;
            tr.truncated_at = n;
            return tr;
        }
        counts.swap(next);
        record(n, rp, false);
    }
    return tr;
}

void validate_radial(const RunSpec& spec) {
    const Space& sp = spec.law->space();
    if (!sp.is_word_space())
        throw std::invalid_argument("radial engine needs a tree / free-group space");
    if (sp.step_law().kind == StepLaw::Kind::generator_weights)
        throw std::invalid_argument("radial engine needs an isotropic step law");
    if (spec.law->mode() != BranchingLaw::Mode::independent)
        throw std::invalid_argument("radial engine supports independent branching only");
    for (const auto& [v, c] : spec.initial.entries())
        if (v != sp.root())
            throw std::invalid_argument("radial engine starts at the root only");
    for (Vertex y : spec.watched)
        if (y != sp.root())
            throw std::invalid_argument("radial engine can watch the root only");
    if (!spec.functionals.empty())
        throw std::invalid_argument("radial engine does not support functionals");
    if (!spec.snapshot_steps.empty())
        throw std::invalid_argument("radial engine does not support snapshots");
    if (spec.horizon + 2 > sp.codec().max_len)
        throw std::invalid_argument("horizon exceeds packed word capacity");
}

}  // namespace

Population step(const Population& m, const BranchingLaw& law, Rng& rng, std::int64_t cap,
                bool* truncated) {
    if (m.empty()) throw std::domain_error("cannot step an empty population");
    if (truncated) *truncated = false;
    std::vector<std::pair<Vertex, std::int64_t>> acc;
    acc.reserve(static_cast<std::size_t>(std::min<std::int64_t>(m.total() * 2, 1 << 20)));
    std::int64_t produced = 0;
    for (const auto& [x, c] : m.entries()) {
        std::size_t before = acc.size();
        law.branch_counts(x, c, rng, acc);
        for (std::size_t i = before; i < acc.size(); ++i) produced += acc[i].second;
        if (produced > cap) {
            if (truncated) *truncated = true;
            return Population::from_pairs(std::move(acc));
        }
    }
    return Population::from_pairs(std::move(acc));
}

RunResult run(const RunSpec& spec) {
    if (!spec.law) throw std::invalid_argument("run needs a branching law");
    if (spec.initial.empty()) throw std::invalid_argument("initial population is empty");
    if (spec.horizon < 0) throw std::invalid_argument("horizon must be >= 0");
    if (spec.trajectories < 1) throw std::invalid_argument("need at least one trajectory");
    if (spec.cap < 1) throw std::invalid_argument("population cap must be >= 1");
    if (spec.law->space().is_word_space()) {
        int max_initial = 0;
        for (const auto& [v, c] : spec.initial.entries())
            max_initial = std::max(max_initial, spec.law->space().codec().len(v));
        if (max_initial + spec.horizon + 1 > spec.law->space().codec().max_len)
            throw std::invalid_argument("horizon exceeds packed word capacity for this space");
    }
    double rho = spec.law->rho();
    if (spec.engine == Engine::radial) validate_radial(spec);

    RunResult res;
    res.rho = rho;
    res.trajectories.resize(static_cast<std::size_t>(spec.trajectories));

    int threads = std::min<std::int64_t>(resolve_threads(spec.threads), spec.trajectories);
    std::atomic<std::int64_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            std::int64_t i = cursor.fetch_add(1);
            if (i >= spec.trajectories) break;
            res.trajectories[static_cast<std::size_t>(i)] =
                spec.engine == Engine::radial ? run_radial(spec, i, rho)
                                              : run_general(spec, i, rho);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& tr : res.trajectories) res.truncated_count += tr.truncated ? 1 : 0;
    return res;
}

namespace {

void enumerate_placements(const std::vector<std::pair<Vertex, double>>& row,
                          const std::function<double(Vertex)>& f, int k, double prob,
                          double fsum, double& acc, std::int64_t& budget) {
    if (k == 0) {
        acc += prob * fsum;
        return;
    }
    for (const auto& [y, p] : row) {
        if (--budget < 0) throw std::domain_error("enumeration budget exhausted (support too large)");
        enumerate_placements(row, f, k - 1, prob * p, fsum + f(y), acc, budget);
    }
}

double enumerate_one_particle(Vertex x, const std::function<double(Vertex)>& f,
                              const BranchingLaw& law, std::int64_t& budget) {
    const OffspringPMF& pmf = law.offspring_at(x);
    std::int64_t kmax = pmf.max_support();
    if (kmax == std::numeric_limits<std::int64_t>::max())
        throw std::domain_error("exact expectation needs finite-support offspring");
    auto row = law.space().neighbors(x);

    double e_indep = 0.0, e_coupled = 0.0;
    bool want_indep = law.mode() != BranchingLaw::Mode::vertex_coupled;
    bool want_coupled = law.mode() != BranchingLaw::Mode::independent;
    for (std::int64_t k = 1; k <= kmax; ++k) {
        double pk = pmf.pmf(k);
        if (pk == 0.0) continue;
        if (want_indep)
            enumerate_placements(row, f, static_cast<int>(k), pk, 0.0, e_indep, budget);
        if (want_coupled)
            for (const auto& [y, p] : row) e_coupled += pk * p * static_cast<double>(k) * f(y);
    }
    switch (law.mode()) {
        case BranchingLaw::Mode::independent: return e_indep;
        case BranchingLaw::Mode::vertex_coupled: return e_coupled;
        case BranchingLaw::Mode::mixture:
            return law.lambda() * e_indep + (1.0 - law.lambda()) * e_coupled;
    }
    return 0.0;
}

}  // namespace

StepExpectation exact_step_expectation(const Population& m,
                                       const std::function<double(Vertex)>& f,
                                       const BranchingLaw& law, std::int64_t budget) {
    if (m.empty()) throw std::domain_error("empty population");
    StepExpectation out;
    for (const auto& [x, c] : m.entries()) {
        const auto mm = law.mean_measures(x);
        double pf = 0.0;
        for (const auto& [y, p] : mm.displacement) pf += p * f(y);
        out.closed_form += static_cast<double>(c) * mm.rho * pf;
        out.enumeration += static_cast<double>(c) * enumerate_one_particle(x, f, law, budget);
    }
    return out;
}

std::string run_to_csv(const RunResult& res, const RunSpec& spec, const Space& space,
                       const std::vector<std::string>& functional_names,
                       const std::string& run_id) {
    std::string csv = "run_id,trajectory_id,n,pop_size,w_n,distinct_sites,truncated";
    for (Vertex y : spec.watched) csv += ",m_" + space.vertex_name(y);
    for (const auto& name : functional_names) csv += ",lift_" + name;
    csv += "\n";
    char buf[64];
    for (const auto& tr : res.trajectories) {
        for (const auto& s : tr.steps) {
            csv += run_id;
            csv += ',';
            csv += std::to_string(tr.id);
            csv += ',';
            csv += std::to_string(s.n);
            csv += ',';
            csv += std::to_string(s.pop_size);
            csv += ',';
            std::snprintf(buf, sizeof buf, "%.17g", s.w);
            csv += buf;
            csv += ',';
            csv += std::to_string(s.distinct_sites);
            csv += ',';
            csv += s.truncated ? '1' : '0';
            for (std::int64_t w : s.watched) {
                csv += ',';
                csv += std::to_string(w);
            }
            for (double v : s.functionals) {
                csv += ',';
                std::snprintf(buf, sizeof buf, "%.17g", v);
                csv += buf;
            }
            csv += '\n';
        }
    }
    return csv;
}

}  // namespace bmc
