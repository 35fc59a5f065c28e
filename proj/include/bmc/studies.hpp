#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmc/boundary.hpp"
#include "bmc/simulator.hpp"

namespace bmc {

using ordered_json = nlohmann::ordered_json;

struct Verdict {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct StudyReport {
    std::string study;
    std::uint64_t seed = 0;
    ordered_json config_echo;
    std::vector<Verdict> verdicts;
    std::int64_t trajectories = 0;
    std::int64_t truncated = 0;
    ordered_json data;
    std::string curves_csv;

    bool all_pass() const;
    ordered_json to_json() const;
};

/// Everything a study needs; built from a JSON config by bmc::config.
struct StudyConfig {
    std::shared_ptr<const Space> space;
    std::shared_ptr<const BranchingLaw> law;
    Population initial;
    int horizon = 15;
    std::int64_t trajectories = 10000;
    std::int64_t cap = 10000000;
    std::uint64_t seed = 1;
    int threads = 0;
    Engine engine = Engine::general;
    std::vector<Vertex> watched;

    double epsilon = 1e-3;            // positivity threshold on W_N
    int depth = 2;                    // boundary table depth
    TestFunction phi;                 // boundary test function
    Vertex x0 = 0;                    // reference point
    std::vector<double> s_grid;       // inequality grid
    double truncated_fraction_limit = 0.5;
    bool histogram_verdicts = true;   // gw study decile requirements
    int median_decline_from = 5;      // heavy-tail contrast: compare W at this n vs N

    ordered_json fixtures;  // committed pilot bands (possibly empty)
    ordered_json echo;      // resolved config, copied into the report
};

StudyReport martingale_study(const StudyConfig& cfg);
StudyReport positivity_study(const StudyConfig& cfg);
StudyReport boundary_limit_study(const StudyConfig& cfg);
StudyReport disappear_study(const StudyConfig& cfg);
StudyReport gw_boundary_study(const StudyConfig& cfg);
StudyReport inequality_checks(const StudyConfig& cfg);

/// Exact-identity suite (the `check` subcommand): kernel row sums, word
/// reduction, lift/merge algebra, stationarity residuals, partition sums,
/// one-step commutation, shift identity. All identities are exact or hold at
/// fixed tolerances; no fixtures involved.
StudyReport invariant_check(const StudyConfig& cfg);

/// Green / Martin / spectral-radius report (the `green` subcommand).
StudyReport green_report(const StudyConfig& cfg);

}  // namespace bmc
