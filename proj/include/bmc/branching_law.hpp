#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "bmc/offspring.hpp"
#include "bmc/population.hpp"
#include "bmc/state_space.hpp"

namespace bmc {

/// Branching law: the family of branching distributions Pi_x. The offspring
/// count is drawn from the pmf attached to x; the placement mode decides how
/// the brood is positioned:
///   independent      every child steps to its own p_x-distributed position
///   vertex_coupled   one position is drawn and the whole brood lands there
///   mixture(lambda)  each branching event picks independent with prob lambda
/// Per-state offspring overrides ("environment") are keyed by distance-from-
/// root bands on word spaces and by state on explicit spaces.
class BranchingLaw {
public:
    enum class Mode { independent, vertex_coupled, mixture };

    BranchingLaw(std::shared_ptr<const Space> space, Mode mode, OffspringPMF base,
                 double lambda = 0.5);

    void add_band_override(std::int64_t depth_lo, std::int64_t depth_hi, OffspringPMF pmf);
    void add_state_override(Vertex x, OffspringPMF pmf);

    const Space& space() const { return *space_; }
    std::shared_ptr<const Space> space_ptr() const { return space_; }
    Mode mode() const { return mode_; }
    double lambda() const { return lambda_; }
    bool has_overrides() const { return !band_overrides_.empty() || !state_overrides_.empty(); }

    const OffspringPMF& offspring_at(Vertex x) const;
    const OffspringPMF& offspring_at_depth(std::int64_t depth) const;  // word spaces

    /// Distinct offspring pmfs across all states (base + overrides).
    std::vector<OffspringPMF> pmf_family() const;

    /// Constant branching ratio (assumption BR); nullopt when state
    /// dependent. The simulator requires it for W_n.
    std::optional<double> constant_ratio() const;
    double rho() const;  // throws without (BR)

    struct MeanMeasures {
        std::vector<std::pair<Vertex, double>> barycentre;
        std::vector<std::pair<Vertex, double>> displacement;
        double rho = 0.0;
    };
    MeanMeasures mean_measures(Vertex x) const;

    /// One particle's brood.
    Population sample_branch(Vertex x, Rng& rng) const;

    /// Brood of `count` particles sitting at x, appended to `out` as
    /// (position, count) pairs. Large counts in independent mode draw the
    /// total offspring as one compound sum and place it multinomially over
    /// the displacement support, which has the same distribution as the
    /// per-particle loop.
    void branch_counts(Vertex x, std::int64_t count, Rng& rng,
                       std::vector<std::pair<Vertex, std::int64_t>>& out) const;

private:
    std::shared_ptr<const Space> space_;
    Mode mode_;
    OffspringPMF base_;
    double lambda_;
    struct Band {
        std::int64_t lo, hi;  // inclusive depth band
        OffspringPMF pmf;
    };
    std::vector<Band> band_overrides_;
    std::vector<std::pair<Vertex, OffspringPMF>> state_overrides_;  // sorted by vertex

    void place_independent(Vertex x, std::int64_t total, Rng& rng,
                           std::vector<std::pair<Vertex, std::int64_t>>& out) const;
};

}  // namespace bmc
