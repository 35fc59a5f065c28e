#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bmc/branching_law.hpp"
#include "bmc/population.hpp"

namespace bmc {

struct StepStats {
    int n = 0;
    std::int64_t pop_size = 0;
    double w = 0.0;  // pop_size / rho^n
    std::int64_t distinct_sites = 0;
    bool truncated = false;  // set on the breach step only
    std::vector<std::int64_t> watched;
    std::vector<double> functionals;  // raw pairings <M_n, f_j>
};

struct TrajectoryResult {
    std::int64_t id = 0;
    bool truncated = false;
    int truncated_at = -1;
    std::vector<StepStats> steps;  // n = 0 .. horizon, fewer when truncated
    std::vector<std::pair<int, Population>> snapshots;
};

/// Which evolution engine a run uses.
///   general  keeps the full position multiset; works for every law.
///   radial   tracks particle counts by distance from the root only. Valid
///            for independent branching on isotropic word-space laws
///            (simple / radial step laws, overrides by depth band at most):
///            the distance profile of the general chain is itself Markov
///            with exactly these transition draws, so the two engines agree
///            in distribution. Radial runs watch the root at most and admit
///            no functionals, and handle population sizes far past what the
///            general engine can hold.
enum class Engine { general, radial };

struct RunSpec {
    std::shared_ptr<const BranchingLaw> law;
    Population initial;
    int horizon = 10;
    std::int64_t trajectories = 1;
    std::int64_t cap = 10000000;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: BMC_THREADS env, else hardware
    Engine engine = Engine::general;
    std::vector<Vertex> watched;
    std::vector<std::function<double(Vertex)>> functionals;
    std::vector<int> snapshot_steps;
    double step_time_budget_s = 0.0;  // 0 disables the wall-clock guard
};

struct RunResult {
    double rho = 1.0;
    std::int64_t truncated_count = 0;
    std::vector<TrajectoryResult> trajectories;
};

/// Runs `spec.trajectories` independent trajectories. Trajectory i draws
/// from Rng::substream(seed, i), and results are merged by trajectory index,
/// so the output is identical for any thread count.
RunResult run(const RunSpec& spec);

/// One transition of the branching Markov chain. When the produced
/// population would exceed `cap`, sets *truncated and returns the partial
/// population accumulated so far.
Population step(const Population& m, const BranchingLaw& law, Rng& rng,
                std::int64_t cap, bool* truncated);

struct StepExpectation {
    double closed_form = 0.0;   // sum_x m(x) rho_x (Pf)(x)
    double enumeration = 0.0;   // exhaustive enumeration of branching outcomes
};

/// E[<M_1, f> | M_0 = m] both ways; requires finite-support offspring.
/// Enumeration work is bounded by `budget` elementary outcomes.
StepExpectation exact_step_expectation(const Population& m,
                                       const std::function<double(Vertex)>& f,
                                       const BranchingLaw& law,
                                       std::int64_t budget = 4000000);

/// Serialises run results into the per-step CSV schema:
/// run_id,trajectory_id,n,pop_size,w_n,distinct_sites,truncated,<watched...>,<functionals...>
std::string run_to_csv(const RunResult& res, const RunSpec& spec, const Space& space,
                       const std::vector<std::string>& functional_names,
                       const std::string& run_id);

}  // namespace bmc
