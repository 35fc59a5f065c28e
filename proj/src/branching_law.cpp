#include "bmc/branching_law.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bmc/sampling.hpp"

namespace bmc {

BranchingLaw::BranchingLaw(std::shared_ptr<const Space> space, Mode mode, OffspringPMF base,
                           double lambda)
    : space_(std::move(space)), mode_(mode), base_(std::move(base)), lambda_(lambda) {
    if (!space_) throw std::invalid_argument("branching law needs a state space");
    if (mode_ == Mode::mixture && !(lambda_ >= 0.0 && lambda_ <= 1.0))
        throw std::invalid_argument("mixture weight must lie in [0,1]");
}

void BranchingLaw::add_band_override(std::int64_t lo, std::int64_t hi, OffspringPMF pmf) {
    if (!space_->is_word_space())
        throw std::invalid_argument("band overrides apply to word spaces only");
    if (lo < 0 || hi < lo) throw std::invalid_argument("bad override band");
    for (const auto& b : band_overrides_)
        if (lo <= b.hi && b.lo <= hi) throw std::invalid_argument("overlapping override bands");
    band_overrides_.push_back({lo, hi, std::move(pmf)});
}

void BranchingLaw::add_state_override(Vertex x, OffspringPMF pmf) {
    if (space_->is_word_space())
        throw std::invalid_argument("state overrides apply to explicit spaces only");
    space_->validate_vertex(x);
    auto it = std::lower_bound(state_overrides_.begin(), state_overrides_.end(), x,
                               [](const auto& a, Vertex v) { return a.first < v; });
    if (it != state_overrides_.end() && it->first == x)
        throw std::invalid_argument("duplicate state override");
    state_overrides_.insert(it, {x, std::move(pmf)});
}

const OffspringPMF& BranchingLaw::offspring_at(Vertex x) const {
    if (space_->is_word_space()) return offspring_at_depth(space_->codec().len(x));
    auto it = std::lower_bound(state_overrides_.begin(), state_overrides_.end(), x,
                               [](const auto& a, Vertex v) { return a.first < v; });
    if (it != state_overrides_.end() && it->first == x) return it->second;
    return base_;
}

const OffspringPMF& BranchingLaw::offspring_at_depth(std::int64_t d) const {
    for (const auto& b : band_overrides_)
        if (d >= b.lo && d <= b.hi) return b.pmf;
    return base_;
}

std::vector<OffspringPMF> BranchingLaw::pmf_family() const {
    std::vector<OffspringPMF> fam;
    fam.push_back(base_);
    for (const auto& b : band_overrides_) fam.push_back(b.pmf);
    for (const auto& [v, p] : state_overrides_) fam.push_back(p);
    return fam;
}

std::optional<double> BranchingLaw::constant_ratio() const {
    double r = base_.mean();
    for (const auto& b : band_overrides_)
        if (std::fabs(b.pmf.mean() - r) > 1e-12) return std::nullopt;
    for (const auto& [v, p] : state_overrides_)
        if (std::fabs(p.mean() - r) > 1e-12) return std::nullopt;
    return r;
}

double BranchingLaw::rho() const {
    auto r = constant_ratio();
    if (!r) throw std::domain_error("branching ratio is not constant across states");
    return *r;
}

BranchingLaw::MeanMeasures BranchingLaw::mean_measures(Vertex x) const {
    MeanMeasures mm;
    mm.rho = offspring_at(x).mean();
    mm.displacement = space_->neighbors(x);
    mm.barycentre = mm.displacement;
    for (auto& [v, p] : mm.barycentre) p *= mm.rho;
    return mm;
}

Population BranchingLaw::sample_branch(Vertex x, Rng& rng) const {
    std::vector<std::pair<Vertex, std::int64_t>> acc;
    branch_counts(x, 1, rng, acc);
    return Population::from_pairs(std::move(acc));
}

void BranchingLaw::place_independent(Vertex x, std::int64_t total, Rng& rng,
                                     std::vector<std::pair<Vertex, std::int64_t>>& out) const {
    if (total <= 0) return;
    if (total < 16) {
        for (std::int64_t i = 0; i < total; ++i)
            out.emplace_back(space_->sample_step(x, rng), 1);
        return;
    }
    // multinomial placement over the neighbour support via chained binomials
    auto nbrs = space_->neighbors(x);
    std::int64_t left = total;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < nbrs.size() && left > 0; ++i) {
        double p = nbrs[i].second / mass;
        std::int64_t n = binomial(rng, left, std::min(1.0, p));
        if (n > 0) out.emplace_back(nbrs[i].first, n);
        left -= n;
        mass -= nbrs[i].second;
    }
    if (left > 0) out.emplace_back(nbrs.back().first, left);
}

void BranchingLaw::branch_counts(Vertex x, std::int64_t count, Rng& rng,
                                 std::vector<std::pair<Vertex, std::int64_t>>& out) const {
    if (count <= 0) throw std::invalid_argument("branch_counts needs count >= 1");
    const OffspringPMF& pmf = offspring_at(x);
    switch (mode_) {
        case Mode::independent: {
            std::int64_t total = pmf.sample_sum(rng, count);
            place_independent(x, total, rng, out);
            return;
        }
        case Mode::vertex_coupled: {
            for (std::int64_t i = 0; i < count; ++i) {
                std::int64_t k = pmf.sample(rng);
                out.emplace_back(space_->sample_step(x, rng), k);
            }
            return;
        }
        case Mode::mixture: {
            std::int64_t n_indep =
                count < 16 ? [&] {
                    std::int64_t n = 0;
                    for (std::int64_t i = 0; i < count; ++i) n += rng.bernoulli(lambda_) ? 1 : 0;
                    return n;
                }()
                           : binomial(rng, count, lambda_);
            if (n_indep > 0) {
                std::int64_t total = pmf.sample_sum(rng, n_indep);
                place_independent(x, total, rng, out);
            }
            for (std::int64_t i = 0; i < count - n_indep; ++i) {
                std::int64_t k = pmf.sample(rng);
                out.emplace_back(space_->sample_step(x, rng), k);
            }
            return;
        }
    }
}

}  // namespace bmc
