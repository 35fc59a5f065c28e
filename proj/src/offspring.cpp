#include "bmc/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bmc/numeric.hpp"
#include "bmc/sampling.hpp"

namespace bmc {

namespace {
constexpr std::int64_t kPrefixEnd = 131073;        // exact prefix sums cover [2, kPrefixEnd)
constexpr std::int64_t kSampleCap = std::int64_t(1) << 32;  // heavy-tail sampling truncation
constexpr double kMeanBudget = 1e12;

double hf(double x) {  // k^-2 ln^-2 k
    double l = std::log(x);
    return 1.0 / (x * x * l * l);
}
double hfw(double x) {  // k^-1 ln^-2 k
    double l = std::log(x);
    return 1.0 / (x * l * l);
}

// integral_n^inf x^-2 ln^-2 x dx = (1/n) int_0^1 ln^-2(n/u) du
double hf_integral(double n) {
    auto g = [n](double u) {
        if (u <= 0.0) return 0.0;
        double l = std::log(n / u);
        return 1.0 / (l * l);
    };
    return integrate(g, 0.0, 1.0, 1e-15) / n;
}

// Euler-Maclaurin tail sum_{k>=n} k^-2 ln^-2 k for n beyond the prefix table
double hf_tail(double n) {
    double l = std::log(n);
    double fp = -(1.0 / (n * n * n * l * l)) * (2.0 + 2.0 / l);  // f'(n)
    return hf_integral(n) + 0.5 * hf(n) - fp / 12.0;
}

// Euler-Maclaurin tail sum_{k>=n} k^-1 ln^-2 k ; its integral is exactly 1/ln n
double hfw_tail(double n) {
    double l = std::log(n);
    double fp = -(1.0 / (n * n * l * l)) * (1.0 + 2.0 / l);
    return 1.0 / l + 0.5 * hfw(n) - fp / 12.0;
}
}  // namespace

struct OffspringPMF::HeavyTables {
    std::int64_t k0 = 2;
    // prefix[i] = sum_{k=k0}^{k0+i-1} hf(k); wprefix likewise for hfw
    std::vector<double> prefix, wprefix;
    double sum_all = 0.0;   // sum_{k>=k0} hf(k)
    double wsum_all = 0.0;  // sum_{k>=k0} hfw(k)
    // dyadic sampling blocks [lo, hi) covering the far tail [kPrefixEnd, 2^32)
    struct Block {
        std::int64_t lo, hi;
        double cum;  // cumulative unnormalised mass up to and including this block
    };
    std::vector<Block> blocks;
    double block_total = 0.0;

    explicit HeavyTables(std::int64_t k0_in) : k0(k0_in) {
        std::size_t n = static_cast<std::size_t>(kPrefixEnd - k0);
        prefix.resize(n + 1, 0.0);
        wprefix.resize(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double k = static_cast<double>(k0 + static_cast<std::int64_t>(i));
            prefix[i + 1] = prefix[i] + hf(k);
            wprefix[i + 1] = wprefix[i] + hfw(k);
        }
        sum_all = prefix[n] + hf_tail(static_cast<double>(kPrefixEnd));
        wsum_all = wprefix[n] + hfw_tail(static_cast<double>(kPrefixEnd));

        double cum = 0.0;
        std::int64_t lo = kPrefixEnd;
        while (lo < kSampleCap) {
            std::int64_t hi = std::int64_t(2)
                              << (63 - __builtin_clzll(static_cast<unsigned long long>(lo)));
            hi = std::min(std::max(hi, lo + 1), kSampleCap);
            cum += range_sum(lo, hi);
            blocks.push_back({lo, hi, cum});
            lo = hi;
        }
        block_total = cum;
    }

    // sum_{k=lo}^{hi-1} hf(k)
    double range_sum(std::int64_t lo, std::int64_t hi) const {
        return tail_from(lo) - tail_from(hi);
    }
    double tail_from(std::int64_t n) const {
        if (n < k0) n = k0;
        if (n < kPrefixEnd) {
            std::size_t i = static_cast<std::size_t>(n - k0);
            return (prefix.back() - prefix[i]) + (sum_all - prefix.back());
        }
        return hf_tail(static_cast<double>(n));
    }
    double wtail_from(std::int64_t n) const {
        if (n < k0) n = k0;
        if (n < kPrefixEnd) {
            std::size_t i = static_cast<std::size_t>(n - k0);
            return (wprefix.back() - wprefix[i]) + (wsum_all - wprefix.back());
        }
        return hfw_tail(static_cast<double>(n));
    }
};

// Alias table over the head region plus one slot for the far tail; draws are
// two rng calls for all but ~1e-6 of the mass.
struct OffspringPMF::HeavyAlias {
    AliasTable table;
    std::int64_t k0 = 2;
    std::size_t tail_slot = 0;

    HeavyAlias(double atom, double c, const HeavyTables& t) {
        k0 = t.k0;
        std::vector<double> w;
        w.reserve(t.prefix.size() + 1);
        w.push_back(atom);
        for (std::size_t i = 0; i + 1 < t.prefix.size(); ++i)
            w.push_back(c * (t.prefix[i + 1] - t.prefix[i]));
        w.push_back(c * t.tail_from(kPrefixEnd));
        tail_slot = w.size() - 1;
        table = AliasTable::build(w);
    }
};

OffspringPMF OffspringPMF::delta(std::int64_t k) {
    if (k < 1) throw std::invalid_argument("delta offspring must be >= 1 (non-extinction)");
    OffspringPMF p;
    p.kind_ = Kind::delta;
    p.delta_k_ = k;
    p.mean_ = static_cast<double>(k);
    return p;
}

OffspringPMF OffspringPMF::explicit_pmf(std::vector<std::pair<std::int64_t, double>> entries) {
    std::sort(entries.begin(), entries.end());
    double sum = 0.0;
    for (const auto& [k, pr] : entries) {
        if (k < 1) throw std::invalid_argument("offspring pmf charges 0: non-extinction violated");
        if (k > 65536) throw std::invalid_argument("explicit offspring support limited to 65536");
        if (pr <= 0.0) throw std::invalid_argument("explicit pmf entries must be positive");
        sum += pr;
    }
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].first == entries[i - 1].first)
            throw std::invalid_argument("duplicate support point in explicit pmf");
    if (entries.empty() || std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("explicit pmf must sum to 1 within 1e-12");
    OffspringPMF p;
    p.kind_ = Kind::explicit_pmf;
    p.entries_ = std::move(entries);
    double m = 0.0;
    for (const auto& [k, pr] : p.entries_) m += static_cast<double>(k) * pr;
    p.mean_ = m;
    return p;
}

OffspringPMF OffspringPMF::geometric(double q) {
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("geometric parameter must be in (0,1]");
    OffspringPMF p;
    p.kind_ = Kind::geometric;
    p.q_ = q;
    p.mean_ = 1.0 / q;
    return p;
}

OffspringPMF OffspringPMF::heavy_tail(double mean, std::int64_t k0) {
    if (k0 < 2) throw std::invalid_argument("heavy tail start must be >= 2");
    if (k0 >= kPrefixEnd / 2) throw std::invalid_argument("heavy tail start too large");
    OffspringPMF p;
    p.kind_ = Kind::heavy_tail;
    p.k0_ = k0;
    p.heavy_ = std::make_shared<const HeavyTables>(k0);
    double s0 = p.heavy_->sum_all;
    double s1 = p.heavy_->wsum_all;
    if (!(mean > 1.0)) throw std::invalid_argument("heavy tail mean must exceed 1");
    p.c_ = (mean - 1.0) / (s1 - s0);
    p.atom_ = 1.0 - p.c_ * s0;
    if (p.atom_ < 0.0)
        throw std::invalid_argument("heavy tail mean out of range for this k0 (atom negative)");
    p.mean_ = mean;
    p.heavy_alias_ = std::make_shared<const HeavyAlias>(p.atom_, p.c_, *p.heavy_);
    return p;
}

std::string OffspringPMF::describe() const {
    switch (kind_) {
        case Kind::delta: return "delta(" + std::to_string(delta_k_) + ")";
        case Kind::explicit_pmf: return "explicit[" + std::to_string(entries_.size()) + "]";
        case Kind::geometric: return "geometric(q=" + std::to_string(q_) + ")";
        case Kind::heavy_tail: return "heavy_tail(mean=" + std::to_string(mean_) + ")";
        case Kind::composite: return "envelope(head<" + std::to_string(head_end_) + ")";
    }
    return "?";
}

double OffspringPMF::mean() const { return mean_; }

double OffspringPMF::pmf(std::int64_t k) const {
    if (k < 1) return 0.0;
    switch (kind_) {
        case Kind::delta: return k == delta_k_ ? 1.0 : 0.0;
        case Kind::explicit_pmf: {
            auto it = std::lower_bound(entries_.begin(), entries_.end(),
                                       std::pair<std::int64_t, double>{k, -1.0});
            return (it != entries_.end() && it->first == k) ? it->second : 0.0;
        }
        case Kind::geometric:
            return std::exp(static_cast<double>(k - 1) * std::log1p(-q_)) * q_;
        case Kind::heavy_tail:
            if (k == 1) return atom_;
            if (k >= k0_) return c_ * hf(static_cast<double>(k));
            return 0.0;
        case Kind::composite: {
            if (k < head_end_) {
                auto it = std::lower_bound(entries_.begin(), entries_.end(),
                                           std::pair<std::int64_t, double>{k, -1.0});
                return (it != entries_.end() && it->first == k) ? it->second : 0.0;
            }
            return tail_src_ ? tail_src_->pmf(k) : 0.0;
        }
    }
    return 0.0;
}

double OffspringPMF::tail(std::int64_t n) const {
    if (n <= 1) return 1.0;
    switch (kind_) {
        case Kind::delta: return n <= delta_k_ ? 1.0 : 0.0;
        case Kind::explicit_pmf: {
            double t = 0.0;
            for (auto it = entries_.rbegin(); it != entries_.rend() && it->first >= n; ++it)
                t += it->second;
            return t;
        }
        case Kind::geometric:
            return std::exp(static_cast<double>(n - 1) * std::log1p(-q_));
        case Kind::heavy_tail:
            if (n <= k0_) return 1.0 - atom_;
            return c_ * heavy_->tail_from(n);
        case Kind::composite: {
            if (n >= head_end_) return tail_src_->tail(n);
            double t = tail_src_->tail(head_end_);
            for (auto it = entries_.rbegin(); it != entries_.rend() && it->first >= n; ++it)
                t += it->second;
            return t;
        }
    }
    return 0.0;
}

std::int64_t OffspringPMF::max_support() const {
    switch (kind_) {
        case Kind::delta: return delta_k_;
        case Kind::explicit_pmf: return entries_.back().first;
        case Kind::composite:
            if (tail_kind_ == TailKind::none)
                return entries_.empty() ? 1 : entries_.back().first;
            return std::numeric_limits<std::int64_t>::max();
        default: return std::numeric_limits<std::int64_t>::max();
    }
}

LlogLMoment OffspringPMF::llogl() const {
    auto klogk = [](double k) { return k * std::log(k); };
    switch (kind_) {
        case Kind::delta: return {klogk(static_cast<double>(delta_k_)), false};
        case Kind::explicit_pmf: {
            double v = 0.0;
            for (const auto& [k, pr] : entries_) v += pr * klogk(static_cast<double>(k));
            return {v, false};
        }
        case Kind::geometric: {
            // geometric decay; sum until the remainder bound is negligible
            double v = 0.0;
            double w = q_;  // pmf at k=1
            for (std::int64_t k = 1; k < 1000000; ++k) {
                double term = w * klogk(static_cast<double>(k));
                v += term;
                w *= (1.0 - q_);
                if (k > 4 && w * klogk(static_cast<double>(k + 1)) / q_ < 1e-17 * (v + 1e-300))
                    break;
            }
            return {v, false};
        }
        case Kind::heavy_tail: {
            // sum pi(k) k ln k = c * sum 1/(k ln k), which diverges by
            // comparison with the integral of 1/(x ln x); report the partial
            // sum over the tabulated range.
            double v = 0.0;
            for (std::int64_t k = k0_; k < kPrefixEnd; ++k)
                v += c_ / (static_cast<double>(k) * std::log(static_cast<double>(k)));
            return {v, true};
        }
        case Kind::composite: {
            double v = 0.0;
            for (const auto& [k, pr] : entries_) v += pr * klogk(static_cast<double>(k));
            if (tail_kind_ == TailKind::none) return {v, false};
            if (tail_kind_ == TailKind::heavy) return {v, true};
            // geometric continuation
            double q = tail_src_->q_;
            double w = tail_src_->pmf(head_end_);
            for (std::int64_t k = head_end_; k < head_end_ + 1000000; ++k) {
                double term = w * klogk(static_cast<double>(k));
                v += term;
                w *= (1.0 - q);
                if (w * klogk(static_cast<double>(k + 1)) / q < 1e-17 * (v + 1e-300)) break;
            }
            return {v, false};
        }
    }
    return {0.0, false};
}

double OffspringPMF::laplace(double s) const {
    if (s < 0.0) throw std::domain_error("Laplace transform needs s >= 0");
    switch (kind_) {
        case Kind::delta: return std::exp(-s * static_cast<double>(delta_k_));
        case Kind::explicit_pmf: {
            double g = 0.0;
            for (const auto& [k, pr] : entries_) g += pr * std::exp(-s * static_cast<double>(k));
            return g;
        }
        case Kind::geometric: {
            double e = std::exp(-s);
            return q_ * e / (1.0 - (1.0 - q_) * e);
        }
        default:
            // heavy tail / composite: reconstruct from the cancellation-free
            // remainder, G = 1 - mean*s + R(s).
            return 1.0 - mean_ * s + remainder(s);
    }
}

double OffspringPMF::remainder(double s) const {
    if (s < 0.0) throw std::domain_error("remainder needs s >= 0");
    if (s == 0.0) return 0.0;
    switch (kind_) {
        case Kind::delta: return psi(s * static_cast<double>(delta_k_));
        case Kind::explicit_pmf: {
            double r = 0.0;
            for (const auto& [k, pr] : entries_) r += pr * psi(s * static_cast<double>(k));
            return r;
        }
        case Kind::geometric: {
            double r = 0.0;
            double w = q_;
            for (std::int64_t k = 1; k < 10000000; ++k) {
                r += w * psi(s * static_cast<double>(k));
                w *= (1.0 - q_);
                // psi(sk) <= sk, so the remainder of the series is below
                // w * s * (k+1/q) / q; stop when that is negligible.
                if (w * s * (static_cast<double>(k) + 1.0 / q_) / q_ < 1e-18 * (r + 1e-300)) break;
            }
            return r;
        }
        case Kind::heavy_tail: {
            double r = atom_ * psi(s);
            for (std::int64_t k = k0_; k < kPrefixEnd; ++k)
                r += c_ * hf(static_cast<double>(k)) * psi(s * static_cast<double>(k));
            r += c_ * heavy_psi_tail(s, static_cast<double>(kPrefixEnd));
            return r;
        }
        case Kind::composite: {
            double r = 0.0;
            for (const auto& [k, pr] : entries_) r += pr * psi(s * static_cast<double>(k));
            if (tail_kind_ == TailKind::none) return r;
            if (tail_kind_ == TailKind::geometric) {
                double q = tail_src_->q_;
                double w = tail_src_->pmf(head_end_);
                for (std::int64_t k = head_end_; k < head_end_ + 10000000; ++k) {
                    r += w * psi(s * static_cast<double>(k));
                    w *= (1.0 - q);
                    if (w * s * (static_cast<double>(k) + 1.0 / q) / q < 1e-18 * (r + 1e-300)) break;
                }
                return r;
            }
            // heavy continuation beyond the head
            const auto& src = *tail_src_;
            std::int64_t from = std::max(head_end_, src.k0_);
            for (std::int64_t k = from; k < kPrefixEnd; ++k)
                r += src.c_ * hf(static_cast<double>(k)) * psi(s * static_cast<double>(k));
            if (from < kPrefixEnd) from = kPrefixEnd;
            r += src.c_ * src.heavy_psi_tail(s, static_cast<double>(from));
            return r;
        }
    }
    return 0.0;
}

// Euler-Maclaurin evaluation of sum_{k>=n} hf(k) psi(sk):
// integral parts split exactly as s/ln n - I0(n) + int hf e^{-sx},
// plus the standard boundary corrections.
double OffspringPMF::heavy_psi_tail(double s, double n) const {
    double l = std::log(n);
    double linear = s / l;          // int_n^inf x^-1 ln^-2 x * s dx
    double minus_one = hf_integral(n);  // int hf(x) * 1 dx
    double expo = 0.0;                  // int hf(x) e^{-sx} dx
    if (s * n < 50.0) {
        auto g = [s](double t) {
            if (t <= 0.0) return 0.0;
            double x = t / s;
            return hf(x) * std::exp(-t) / s;
        };
        expo = integrate(g, s * n, 50.0, 1e-16);
    }
    double f_n = hf(n);
    double psi_n = psi(s * n);
    double fp_n = -(f_n / n) * (2.0 + 2.0 / l);
    double psip_n = s * (1.0 - std::exp(-s * n));
    double integral = linear - minus_one + expo;
    return integral + 0.5 * f_n * psi_n - (fp_n * psi_n + f_n * psip_n) / 12.0;
}

std::int64_t OffspringPMF::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::delta: return delta_k_;
        case Kind::explicit_pmf: {
            double u = rng.u01();
            double acc = 0.0;
            for (const auto& [k, pr] : entries_) {
                acc += pr;
                if (u < acc) return k;
            }
            return entries_.back().first;
        }
        case Kind::geometric: return geometric_shifted(rng, q_);
        case Kind::heavy_tail: {
            std::size_t slot = heavy_alias_->table.sample(rng);
            if (slot == 0) return 1;
            if (slot != heavy_alias_->tail_slot) return k0_ + static_cast<std::int64_t>(slot) - 1;
            return sample_heavy_tail_part(rng);  // conditioned on k >= kPrefixEnd
        }
        case Kind::composite: {
            double u = rng.u01();
            double acc = 0.0;
            for (const auto& [k, pr] : entries_) {
                acc += pr;
                if (u < acc) return k;
            }
            if (tail_kind_ == TailKind::geometric)
                return head_end_ - 1 + geometric_shifted(rng, tail_src_->q_);
            throw std::logic_error("sampling a heavy-tailed envelope is not supported");
        }
    }
    return 1;
}

std::int64_t OffspringPMF::sample_heavy_tail_part(Rng& rng) const {
    const auto& t = *heavy_;
    double u = rng.u01() * t.block_total;
    std::size_t bi = 0;
    while (bi + 1 < t.blocks.size() && u > t.blocks[bi].cum) ++bi;
    const auto& blk = t.blocks[bi];
    // Pareto-floor proposal with rejection: propose k = floor(X) where X has
    // density ~ x^-2 on [lo, hi), accept with (1+1/k) ln^-2 k / M.
    double A = static_cast<double>(blk.lo);
    double C = static_cast<double>(blk.hi);
    double la = std::log(A);
    double M = (1.0 + 1.0 / A) / (la * la);
    for (;;) {
        double v = rng.u01();
        double x = 1.0 / (1.0 / A - v * (1.0 / A - 1.0 / C));
        double kf = std::floor(x);
        if (kf < A || kf >= C) continue;
        double lk = std::log(kf);
        double ratio = (1.0 + 1.0 / kf) / (lk * lk);
        if (rng.u01() * M <= ratio) return static_cast<std::int64_t>(kf);
    }
}

std::int64_t OffspringPMF::sample_sum(Rng& rng, std::int64_t count) const {
    if (count < 0) throw std::invalid_argument("sample_sum needs count >= 0");
    if (count == 0) return 0;
    switch (kind_) {
        case Kind::delta: return count * delta_k_;
        case Kind::geometric: {
            if (q_ >= 1.0) return count;
            if (count < 16) {
                std::int64_t s = 0;
                for (std::int64_t i = 0; i < count; ++i) s += geometric_shifted(rng, q_);
                return s;
            }
            return count + negative_binomial(rng, static_cast<double>(count), q_);
        }
        case Kind::explicit_pmf: {
            if (count < 16) {
                std::int64_t s = 0;
                for (std::int64_t i = 0; i < count; ++i) s += sample(rng);
                return s;
            }
            // multinomial over the support via sequential binomials
            std::int64_t s = 0;
            std::int64_t left = count;
            double mass = 1.0;
            for (std::size_t i = 0; i + 1 < entries_.size() && left > 0; ++i) {
                double p = entries_[i].second / mass;
                std::int64_t n = binomial(rng, left, std::min(1.0, p));
                s += n * entries_[i].first;
                left -= n;
                mass -= entries_[i].second;
            }
            s += left * entries_.back().first;
            return s;
        }
        default: {
            std::int64_t s = 0;
            for (std::int64_t i = 0; i < count; ++i) s += sample(rng);
            return s;
        }
    }
}

double OffspringPMF::truncation_mean_deficit() const {
    if (kind_ == Kind::heavy_tail) return c_ * hfw_tail(static_cast<double>(kSampleCap));
    if (kind_ == Kind::composite && tail_kind_ == TailKind::heavy)
        return tail_src_->truncation_mean_deficit();
    return 0.0;
}

bool OffspringPMF::dominates(const OffspringPMF& other) const {
    // Pointwise tail comparison on an initial segment, then a family rule
    // for the two analytic continuations.
    auto fin = [](const OffspringPMF& p) { return p.max_support() != std::numeric_limits<std::int64_t>::max(); };

    std::int64_t ncheck = 64;
    if (fin(other)) ncheck = std::max(ncheck, other.max_support() + 1);
    if (fin(*this)) ncheck = std::max(ncheck, max_support() + 1);
    if (kind_ == Kind::heavy_tail) ncheck = std::max(ncheck, k0_ + 1);
    if (other.kind_ == Kind::heavy_tail) ncheck = std::max(ncheck, other.k0_ + 1);
    if (kind_ == Kind::composite) ncheck = std::max(ncheck, head_end_);
    if (other.kind_ == Kind::composite) ncheck = std::max(ncheck, other.head_end_);

    // Effective analytic continuations beyond ncheck
    auto cont = [&](const OffspringPMF& p) -> const OffspringPMF* {
        if (p.kind_ == Kind::geometric || p.kind_ == Kind::heavy_tail) return &p;
        if (p.kind_ == Kind::composite && p.tail_src_) return p.tail_src_.get();
        return nullptr;  // finite
    };
    const OffspringPMF* ct = cont(*this);
    const OffspringPMF* co = cont(other);
    bool this_finite = fin(*this);
    bool other_finite = fin(other);

    if (!other_finite && this_finite) return false;  // positive tail vs zero tail

    if (!this_finite && !other_finite) {
        bool t_heavy = ct->kind_ == Kind::heavy_tail;
        bool o_heavy = co->kind_ == Kind::heavy_tail;
        if (!t_heavy && o_heavy) return false;  // geometric never dominates heavy
        if (t_heavy && o_heavy) {
            if (ct->c_ < co->c_ - 1e-15) return false;
            ncheck = std::max({ncheck, ct->k0_ + 1, co->k0_ + 1});
        } else if (!t_heavy && !o_heavy) {
            if (ct->q_ > co->q_ + 1e-15) return false;  // thinner tail cannot dominate
        } else {
            // heavy dominates geometric beyond a crossing-safe point: extend
            // the pointwise check until a single heavy pmf term beats the
            // geometric tail and the log-slopes have separated.
            double q = co->q_;
            double alpha = -std::log1p(-q);
            std::int64_t n = ncheck;
            for (int guard = 0; guard < 80; ++guard) {
                double lhs = ct->c_ * hf(static_cast<double>(n));
                double rhs = std::exp(static_cast<double>(n - 1) * std::log1p(-q));
                double slope_ok = (2.0 + 2.0 / std::log(static_cast<double>(n))) / static_cast<double>(n);
                if (lhs > rhs && slope_ok < alpha) break;
                n *= 2;
                if (n > (std::int64_t(1) << 45))
                    throw std::logic_error("domination crossover search failed");
            }
            ncheck = std::max(ncheck, n);
        }
    }

    for (std::int64_t n = 2; n <= ncheck; ++n)
        if (other.tail(n) > tail(n) + 1e-15) return false;
    return true;
}

EnvelopeResult envelope(const std::vector<OffspringPMF>& family) {
    if (family.empty()) throw std::invalid_argument("envelope of an empty family");
    EnvelopeResult res;

    double max_mean = 0.0;
    for (const auto& p : family) max_mean = std::max(max_mean, p.mean());
    if (max_mean > kMeanBudget) {
        res.failure = "sup-tail not summable within the mean budget";
        return res;
    }

    // Head length: past every finite support / head / k0, then extend until
    // the analytic continuation (if any) is the pointwise maximum.
    std::int64_t H = 64;
    const OffspringPMF* best_geo = nullptr;
    const OffspringPMF* best_heavy = nullptr;
    for (const auto& p : family) {
        if (p.max_support() != std::numeric_limits<std::int64_t>::max())
            H = std::max(H, p.max_support() + 1);
        const OffspringPMF* c = nullptr;
        if (p.kind() == OffspringPMF::Kind::geometric || p.kind() == OffspringPMF::Kind::heavy_tail)
            c = &p;
        if (c == nullptr) continue;
        if (c->kind() == OffspringPMF::Kind::geometric) {
            if (!best_geo || c->geometric_q() < best_geo->geometric_q()) best_geo = c;
        } else {
            if (!best_heavy || c->tail(1 << 20) > best_heavy->tail(1 << 20)) best_heavy = c;
        }
    }
    const OffspringPMF* tail_src = best_heavy ? best_heavy : best_geo;
    if (H > 65537) {
        res.failure = "envelope head bound exceeded (finite support too large)";
        return res;
    }
    if (tail_src) {
        for (int guard = 0;; ++guard) {
            double ts = tail_src->tail(H);
            double mx = 0.0;
            for (const auto& p : family) mx = std::max(mx, p.tail(H));
            if (ts >= mx * (1.0 - 1e-14)) break;
            H *= 2;
            if (guard > 40 || H > 65537) {
                res.failure = "envelope head bound exceeded while stitching the tail";
                return res;
            }
        }
    }

    // sup-tail on [1, H], pmf by differencing
    std::vector<double> tstar(static_cast<std::size_t>(H) + 1, 0.0);
    for (std::int64_t n = 1; n <= H; ++n) {
        double mx = 0.0;
        for (const auto& p : family) mx = std::max(mx, p.tail(n));
        tstar[static_cast<std::size_t>(n)] = mx;
    }
    double t_end = tail_src ? tail_src->tail(H) : 0.0;

    // mean = sum of tails; enforce the budget
    double mean_head = 0.0;
    for (std::int64_t n = 1; n <= H - 1; ++n) mean_head += tstar[static_cast<std::size_t>(n)];
    double mean_tail = 0.0;
    if (tail_src) {
        if (tail_src->kind() == OffspringPMF::Kind::geometric)
            mean_tail = tail_src->tail(H) / tail_src->geometric_q();
        else
            mean_tail = tail_src->mean();  // finite upper bound; only the budget check uses it
    }
    if (mean_head + mean_tail > kMeanBudget) {
        res.failure = "sup-tail not summable within the mean budget";
        return res;
    }

    // If one member attains the sup everywhere, return it unchanged.
    for (const auto& p : family) {
        bool match = true;
        for (std::int64_t n = 1; n <= H && match; ++n)
            match = p.tail(n) >= tstar[static_cast<std::size_t>(n)] * (1.0 - 1e-14);
        if (match) {
            const OffspringPMF* c =
                (p.kind() == OffspringPMF::Kind::geometric || p.kind() == OffspringPMF::Kind::heavy_tail)
                    ? &p : nullptr;
            bool tail_match = (tail_src == nullptr && p.max_support() != std::numeric_limits<std::int64_t>::max())
                              || (c != nullptr && c == tail_src);
            if (tail_match) {
                res.ok = true;
                res.pmf = p;
                res.llogl = p.llogl();
                return res;
            }
        }
    }

    OffspringPMF env;
    env.kind_ = OffspringPMF::Kind::composite;
    env.head_end_ = H;
    env.tail_kind_ = tail_src
                         ? (tail_src->kind() == OffspringPMF::Kind::heavy_tail
                                ? OffspringPMF::TailKind::heavy
                                : OffspringPMF::TailKind::geometric)
                         : OffspringPMF::TailKind::none;
    if (tail_src) env.tail_src_ = std::make_shared<const OffspringPMF>(*tail_src);
    for (std::int64_t k = 1; k < H; ++k) {
        double next = (k == H - 1) ? t_end : tstar[static_cast<std::size_t>(k + 1)];
        double pk = tstar[static_cast<std::size_t>(k)] - next;
        if (pk > 1e-300) env.entries_.emplace_back(k, pk);
    }
    // mean of the composite: head part + analytic continuation
    double m = 0.0;
    for (const auto& [k, pr] : env.entries_) m += static_cast<double>(k) * pr;
    if (tail_src) {
        if (tail_src->kind() == OffspringPMF::Kind::geometric) {
            double q = tail_src->geometric_q();
            double rH = tail_src->tail(H);
            // sum_{k>=H} k (1-q)^{k-1} q = rH * (H + (1-q)/q)
            m += rH * (static_cast<double>(H) + (1.0 - q) / q);
        } else {
            const auto& hs = *tail_src;
            std::int64_t from = std::max(H, hs.k0_);
            m += hs.c_ * hs.heavy_->wtail_from(from);
        }
    }
    env.mean_ = m;
    res.ok = true;
    res.pmf = env;
    res.llogl = env.llogl();
    return res;
}

}  // namespace bmc
