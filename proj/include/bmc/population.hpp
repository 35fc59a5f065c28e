#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bmc/rational.hpp"
#include "bmc/state_space.hpp"

namespace bmc {

/// A population: finitely supported multiset over vertices. Counts are
/// strictly positive 64-bit integers kept sorted by vertex code, so
/// iteration order is deterministic and merging is a linear sweep.
/// Populations are value types; nothing shares them mutably.
class Population {
public:
    using Entry = std::pair<Vertex, std::int64_t>;

    Population() = default;

    static Population singleton(Vertex x, std::int64_t count = 1) {
        Population m;
        if (count <= 0) throw std::invalid_argument("population counts must be >= 1");
        m.items_.emplace_back(x, count);
        m.total_ = count;
        return m;
    }

    /// Builds from unsorted (vertex, count) pairs; repeated vertices add up.
    static Population from_pairs(std::vector<Entry> pairs) {
        std::sort(pairs.begin(), pairs.end());
        Population m;
        for (const auto& [v, c] : pairs) {
            if (c <= 0) throw std::invalid_argument("population counts must be >= 1");
            if (!m.items_.empty() && m.items_.back().first == v)
                m.items_.back().second += c;
            else
                m.items_.emplace_back(v, c);
            m.total_ += c;
        }
        return m;
    }

    std::int64_t total() const { return total_; }
    bool empty() const { return items_.empty(); }
    std::size_t distinct_sites() const { return items_.size(); }
    const std::vector<Entry>& entries() const { return items_; }

    std::int64_t count(Vertex x) const {
        auto it = std::lower_bound(items_.begin(), items_.end(), Entry{x, 0},
                                   [](const Entry& a, const Entry& b) { return a.first < b.first; });
        return (it != items_.end() && it->first == x) ? it->second : 0;
    }

    /// Empirical distribution m / ||m||.
    std::vector<std::pair<Vertex, double>> empirical() const {
        if (empty()) throw std::domain_error("empirical distribution of an empty population");
        std::vector<std::pair<Vertex, double>> out;
        out.reserve(items_.size());
        double inv = 1.0 / static_cast<double>(total_);
        for (const auto& [v, c] : items_) out.emplace_back(v, static_cast<double>(c) * inv);
        return out;
    }

    /// Exact-rational empirical distribution; masses sum to 1 exactly.
    std::vector<std::pair<Vertex, Rational>> empirical_exact() const {
        if (empty()) throw std::domain_error("empirical distribution of an empty population");
        std::vector<std::pair<Vertex, Rational>> out;
        out.reserve(items_.size());
        for (const auto& [v, c] : items_) out.emplace_back(v, Rational(c, total_));
        return out;
    }

    /// Pairing <m, f> = sum m(x) f(x).
    double lift(const std::function<double(Vertex)>& f) const {
        double acc = 0;
        for (const auto& [v, c] : items_) acc += static_cast<double>(c) * f(v);
        return acc;
    }

    Population merge(const Population& other) const {
        Population out;
        out.items_.reserve(items_.size() + other.items_.size());
        auto a = items_.begin();
        auto b = other.items_.begin();
        while (a != items_.end() || b != other.items_.end()) {
            if (b == other.items_.end() || (a != items_.end() && a->first < b->first))
                out.items_.push_back(*a++);
            else if (a == items_.end() || b->first < a->first)
                out.items_.push_back(*b++);
            else {
                out.items_.emplace_back(a->first, a->second + b->second);
                ++a;
                ++b;
            }
        }
        out.total_ = total_ + other.total_;
        return out;
    }

    /// CSV rows (vertex_string, count), one per support point.
    std::string to_csv(const Space& space) const {
        std::string s = "vertex,count\n";
        for (const auto& [v, c] : items_)
            s += space.vertex_name(v) + "," + std::to_string(c) + "\n";
        return s;
    }

private:
    std::vector<Entry> items_;
    std::int64_t total_ = 0;
};

}  // namespace bmc
