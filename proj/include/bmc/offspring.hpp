#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bmc/rng.hpp"

namespace bmc {

struct LlogLMoment {
    double value = 0.0;   // partial value when divergent
    bool divergent = false;
};

class OffspringPMF;
struct EnvelopeResult;
EnvelopeResult envelope(const std::vector<OffspringPMF>& family);

/// Offspring distribution on {1,2,...} (non-extinction is enforced: no mass
/// at 0). Four families:
///   delta(k)           point mass
///   explicit_pmf       finite support, listed probabilities
///   geometric(q)       pmf (1-q)^{k-1} q on {1,2,...}, mean 1/q
///   heavy_tail(mu,k0)  atom at 1 plus c k^-2 (ln k)^-2 on k >= k0, with
///                      (atom, c) solved so the mass is 1 and the mean is mu.
///                      The mean is finite; the k log k series diverges.
/// plus the composite shape produced by envelope(): an explicit head and an
/// analytic tail continuation.
///
/// Sampling truncates the heavy tail at k = 2^32; the resulting mean deficit
/// is c * sum_{k>2^32} 1/(k ln^2 k) ~ c / ln(2^32) and is reported by
/// truncation_mean_deficit(). Moments always refer to the untruncated law.
class OffspringPMF {
public:
    enum class Kind { delta, explicit_pmf, geometric, heavy_tail, composite };
    enum class TailKind { none, geometric, heavy };

    static OffspringPMF delta(std::int64_t k);
    static OffspringPMF explicit_pmf(std::vector<std::pair<std::int64_t, double>> entries);
    static OffspringPMF geometric(double q);
    static OffspringPMF heavy_tail(double mean, std::int64_t k0 = 2);

    Kind kind() const { return kind_; }
    std::string describe() const;

    double mean() const;
    LlogLMoment llogl() const;

    double pmf(std::int64_t k) const;
    /// P[X >= n] for n >= 1.
    double tail(std::int64_t n) const;
    /// Largest support point, or INT64_MAX for unbounded families.
    std::int64_t max_support() const;

    /// Laplace transform G(s) = E e^{-sX}, s >= 0.
    double laplace(double s) const;
    /// Remainder R(s) = G(s) - 1 + mean * s = E psi(sX); computed as a sum
    /// of the positive terms psi(sk), so there is no cancellation.
    double remainder(double s) const;

    std::int64_t sample(Rng& rng) const;
    /// Sum of `count` independent draws. Uses the exact compound shortcuts
    /// (delta: count*k; geometric: count + NegBinomial) where they exist.
    std::int64_t sample_sum(Rng& rng, std::int64_t count) const;

    /// Tail domination: every tail of `other` is <= the matching tail here.
    bool dominates(const OffspringPMF& other) const;

    double truncation_mean_deficit() const;

    // family parameters (valid per kind)
    std::int64_t delta_k() const { return delta_k_; }
    double geometric_q() const { return q_; }
    const std::vector<std::pair<std::int64_t, double>>& entries() const { return entries_; }

private:
    friend EnvelopeResult envelope(const std::vector<OffspringPMF>& family);

    Kind kind_ = Kind::delta;
    std::int64_t delta_k_ = 1;
    double q_ = 0.5;                                        // geometric
    std::vector<std::pair<std::int64_t, double>> entries_;  // explicit, sorted by k
    // heavy tail
    double mean_ = 1.0;
    std::int64_t k0_ = 2;
    double atom_ = 0.0;  // mass at 1
    double c_ = 0.0;
    struct HeavyTables;
    std::shared_ptr<const HeavyTables> heavy_;
    struct HeavyAlias;
    std::shared_ptr<const HeavyAlias> heavy_alias_;  // O(1) head sampler
    // composite: explicit head on [1, head_end), analytic continuation beyond
    TailKind tail_kind_ = TailKind::none;
    std::int64_t head_end_ = 0;
    std::shared_ptr<const OffspringPMF> tail_src_;  // family the tail copies

    double heavy_psi_tail(double s, double n) const;      // E-M tail of sum hf(k) psi(sk)
    std::int64_t sample_heavy_tail_part(Rng& rng) const;  // conditioned on k >= k0
};

struct EnvelopeResult {
    bool ok = false;
    std::string failure;  // set when !ok
    OffspringPMF pmf;     // dominating pmf when ok
    LlogLMoment llogl;
};

/// Pointwise supremum of tails over a family, renormalised into a pmf.
/// Fails when the sup-tail is not summable within the configured bound
/// (mean budget 1e12).
EnvelopeResult envelope(const std::vector<OffspringPMF>& family);

}  // namespace bmc
