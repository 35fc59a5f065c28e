#include "bmc/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace bmc {

WordCodec WordCodec::make(int alphabet, bool involutive) {
    WordCodec c;
    c.alphabet = alphabet;
    c.involutive = involutive;
    c.bits = 1;
    while ((1 << c.bits) < alphabet) ++c.bits;
    c.max_len = kLenShift / c.bits;
    if (c.max_len > 57) c.max_len = 57;
    return c;
}

Vertex WordCodec::pop(Vertex v) const {
    int n = len(v);
    if (n == 0) throw std::domain_error("pop on empty word");
    Vertex body = v & ((Vertex(1) << kLenShift) - 1);
    body &= (Vertex(1) << ((n - 1) * bits)) - 1;
    return body | (Vertex(n - 1) << kLenShift);
}

Vertex WordCodec::push_raw(Vertex v, int l) const {
    int n = len(v);
    if (n >= max_len)
        throw std::length_error("word length exceeds packed capacity (" +
                                std::to_string(max_len) + ")");
    Vertex body = v & ((Vertex(1) << kLenShift) - 1);
    body |= Vertex(l) << (n * bits);
    return body | (Vertex(n + 1) << kLenShift);
}

Vertex WordCodec::push_reduced(Vertex v, int l) const {
    int n = len(v);
    if (n > 0 && last(v) == inverse(l)) return pop(v);
    return push_raw(v, l);
}

Vertex WordCodec::reduce(const std::vector<int>& letters) const {
    Vertex v = 0;
    for (int l : letters) v = push_reduced(v, l);
    return v;
}

std::vector<int> WordCodec::reduce_letters(const std::vector<int>& letters) const {
    std::vector<int> stack;
    stack.reserve(letters.size());
    for (int l : letters) {
        if (!stack.empty() && stack.back() == inverse(l))
            stack.pop_back();
        else
            stack.push_back(l);
    }
    return stack;
}

int WordCodec::common_prefix(Vertex a, Vertex b) const {
    int n = std::min(len(a), len(b));
    for (int i = 0; i < n; ++i)
        if (letter(a, i) != letter(b, i)) return i;
    return n;
}

static void check_law(const StepLaw& law, int alphabet) {
    switch (law.kind) {
        case StepLaw::Kind::simple:
            break;
        case StepLaw::Kind::generator_weights: {
            if (static_cast<int>(law.weights.size()) != alphabet)
                throw std::invalid_argument("step law weight list must have one entry per generator");
            double s = 0;
            for (double w : law.weights) {
                if (w <= 0) throw std::invalid_argument("step law weights must be strictly positive");
                s += w;
            }
            if (std::fabs(s - 1.0) > 1e-12)
                throw std::invalid_argument("step law weights must sum to 1 within 1e-12");
            break;
        }
        case StepLaw::Kind::radial:
            if (!(law.back > 0.0 && law.back < 1.0))
                throw std::invalid_argument("radial step law needs back probability in (0,1)");
            break;
    }
}

Space Space::tree(int degree, StepLaw law) {
    if (degree < 2) throw std::invalid_argument("tree degree must be >= 2");
    if (degree > 8) throw std::invalid_argument("tree degree > 8 not supported by the packed-word codec");
    check_law(law, degree);
    Space s;
    s.kind_ = SpaceKind::tree;
    s.codec_ = WordCodec::make(degree, true);
    s.law_ = std::move(law);
    s.degree_ = degree;
    return s;
}

Space Space::free_group(int rank, StepLaw law) {
    if (rank < 1) throw std::invalid_argument("free group rank must be >= 1");
    if (rank > 4) throw std::invalid_argument("free group rank > 4 not supported by the packed-word codec");
    check_law(law, 2 * rank);
    Space s;
    s.kind_ = SpaceKind::free_group;
    s.codec_ = WordCodec::make(2 * rank, false);
    s.law_ = std::move(law);
    s.degree_ = 2 * rank;
    return s;
}

Space Space::explicit_kernel(std::vector<std::string> states,
                             std::vector<std::vector<double>> matrix) {
    if (states.empty()) throw std::invalid_argument("explicit space needs at least one state");
    if (matrix.size() != states.size())
        throw std::invalid_argument("explicit kernel matrix must have one row per state");
    Space s;
    s.kind_ = SpaceKind::explicit_kernel;
    s.states_ = std::move(states);
    s.rows_.resize(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (matrix[i].size() != s.states_.size())
            throw std::invalid_argument("explicit kernel row " + std::to_string(i) + " has wrong width");
        double sum = 0;
        for (std::size_t j = 0; j < matrix[i].size(); ++j) {
            double p = matrix[i][j];
            if (p < 0) throw std::invalid_argument("explicit kernel entries must be non-negative");
            if (p > 0) s.rows_[i].emplace_back(static_cast<int>(j), p);
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("explicit kernel row " + std::to_string(i) +
                                        " must sum to 1 within 1e-12");
        if (s.rows_[i].empty())
            throw std::invalid_argument("explicit kernel row " + std::to_string(i) + " is empty");
    }
    for (std::size_t i = 0; i < s.states_.size(); ++i) {
        if (!s.state_index_.emplace(s.states_[i], static_cast<int>(i)).second)
            throw std::invalid_argument("duplicate state name '" + s.states_[i] + "'");
    }
    return s;
}

bool Space::nearest_neighbour() const { return is_word_space(); }

bool Space::group_invariant() const {
    return is_word_space() && law_.kind != StepLaw::Kind::radial;
}

double Space::letter_prob(int l) const {
    if (!group_invariant()) throw std::domain_error("letter_prob needs a group-invariant law");
    if (law_.kind == StepLaw::Kind::simple) return 1.0 / degree_;
    return law_.weights[l];
}

void Space::validate_vertex(Vertex x) const {
    if (is_word_space()) {
        int n = codec_.len(x);
        if (n > codec_.max_len) throw std::domain_error("malformed vertex: bad length field");
        for (int i = 0; i < n; ++i) {
            int l = codec_.letter(x, i);
            if (l >= codec_.alphabet) throw std::domain_error("malformed vertex: letter out of range");
            if (i > 0 && codec_.letter(x, i - 1) == codec_.inverse(l))
                throw std::domain_error("malformed vertex: word not reduced");
        }
        Vertex body = x & ((Vertex(1) << WordCodec::kLenShift) - 1);
        if (n < codec_.max_len && (body >> (n * codec_.bits)) != 0)
            throw std::domain_error("malformed vertex: stray bits");
    } else {
        if (x >= states_.size()) throw std::domain_error("malformed vertex: state index out of range");
    }
}

void Space::neighbors(Vertex x, std::vector<std::pair<Vertex, double>>& out) const {
    out.clear();
    if (is_word_space()) {
        int n = codec_.len(x);
        for (int l = 0; l < degree_; ++l) {
            double p;
            switch (law_.kind) {
                case StepLaw::Kind::simple: p = 1.0 / degree_; break;
                case StepLaw::Kind::generator_weights: p = law_.weights[l]; break;
                case StepLaw::Kind::radial:
                    if (n == 0)
                        p = 1.0 / degree_;
                    else if (l == codec_.inverse(codec_.last(x)))
                        p = law_.back;
                    else
                        p = (1.0 - law_.back) / (degree_ - 1);
                    break;
                default: p = 0; break;
            }
            out.emplace_back(codec_.push_reduced(x, l), p);
        }
    } else {
        validate_vertex(x);
        for (auto [j, p] : rows_[static_cast<std::size_t>(x)])
            out.emplace_back(static_cast<Vertex>(j), p);
    }
}

std::vector<std::pair<Vertex, double>> Space::neighbors(Vertex x) const {
    std::vector<std::pair<Vertex, double>> out;
    neighbors(x, out);
    return out;
}

Vertex Space::sample_step(Vertex x, Rng& rng) const {
    if (is_word_space()) {
        int n = codec_.len(x);
        int l;
        switch (law_.kind) {
            case StepLaw::Kind::simple:
                l = static_cast<int>(rng.below(static_cast<std::uint64_t>(degree_)));
                break;
            case StepLaw::Kind::generator_weights: {
                double u = rng.u01();
                double acc = 0;
                l = degree_ - 1;
                for (int i = 0; i < degree_; ++i) {
                    acc += law_.weights[i];
                    if (u < acc) { l = i; break; }
                }
                break;
            }
            case StepLaw::Kind::radial: {
                if (n == 0) {
                    l = static_cast<int>(rng.below(static_cast<std::uint64_t>(degree_)));
                } else {
                    int back_letter = codec_.inverse(codec_.last(x));
                    if (rng.bernoulli(law_.back)) {
                        l = back_letter;
                    } else {
                        int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(degree_ - 1)));
                        l = r < back_letter ? r : r + 1;
                    }
                }
                break;
            }
            default: l = 0; break;
        }
        return codec_.push_reduced(x, l);
    }
    validate_vertex(x);
    const auto& row = rows_[static_cast<std::size_t>(x)];
    double u = rng.u01();
    double acc = 0;
    for (const auto& [j, p] : row) {
        acc += p;
        if (u < acc) return static_cast<Vertex>(j);
    }
    return static_cast<Vertex>(row.back().first);
}

std::int64_t Space::distance(Vertex x, Vertex y) const {
    if (is_word_space()) {
        int c = codec_.common_prefix(x, y);
        return (codec_.len(x) - c) + (codec_.len(y) - c);
    }
    validate_vertex(x);
    validate_vertex(y);
    if (x == y) return 0;
    // BFS on the support graph; explicit spaces are small.
    std::vector<std::int64_t> dist(states_.size(), -1);
    std::deque<std::size_t> q;
    dist[static_cast<std::size_t>(x)] = 0;
    q.push_back(static_cast<std::size_t>(x));
    while (!q.empty()) {
        std::size_t cur = q.front();
        q.pop_front();
        for (auto [j, p] : rows_[cur]) {
            if (dist[static_cast<std::size_t>(j)] < 0) {
                dist[static_cast<std::size_t>(j)] = dist[cur] + 1;
                if (static_cast<Vertex>(j) == y) return dist[static_cast<std::size_t>(j)];
                q.push_back(static_cast<std::size_t>(j));
            }
        }
    }
    throw std::domain_error("vertices are not connected in the explicit kernel");
}

Vertex Space::parent(Vertex x) const {
    if (!is_word_space()) throw std::domain_error("parent() is defined for word spaces only");
    return codec_.pop(x);
}

std::string Space::vertex_name(Vertex x) const {
    if (!is_word_space()) {
        validate_vertex(x);
        return states_[static_cast<std::size_t>(x)];
    }
    int n = codec_.len(x);
    if (n == 0) return kind_ == SpaceKind::tree ? "o" : "e";
    std::string s;
    s.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int l = codec_.letter(x, i);
        if (kind_ == SpaceKind::tree)
            s.push_back(static_cast<char>('0' + l));
        else
            s.push_back(static_cast<char>((l & 1) ? 'A' + (l >> 1) : 'a' + (l >> 1)));
    }
    return s;
}

Vertex Space::parse_vertex(const std::string& name) const {
    if (!is_word_space()) {
        auto it = state_index_.find(name);
        if (it == state_index_.end())
            throw std::invalid_argument("unknown state name '" + name + "'");
        return static_cast<Vertex>(it->second);
    }
    if (name.empty() || name == "o" || name == "e") return root();
    Vertex v = 0;
    for (char ch : name) {
        int l;
        if (kind_ == SpaceKind::tree) {
            if (ch < '0' || ch >= '0' + degree_)
                throw std::invalid_argument("bad tree word letter '" + std::string(1, ch) + "'");
            l = ch - '0';
        } else {
            if (ch >= 'a' && ch < 'a' + degree_ / 2)
                l = 2 * (ch - 'a');
            else if (ch >= 'A' && ch < 'A' + degree_ / 2)
                l = 2 * (ch - 'A') + 1;
            else
                throw std::invalid_argument("bad free-group word letter '" + std::string(1, ch) + "'");
        }
        int before = codec_.len(v);
        v = codec_.push_reduced(v, l);
        if (codec_.len(v) < before + 1)
            throw std::invalid_argument("word '" + name + "' is not reduced");
    }
    return v;
}

TruncatedSpace Space::truncate(int D, int D_buf, std::size_t max_vertices) const {
    if (D < 1 || D_buf < 1) throw std::invalid_argument("truncation radii must be >= 1");
    int radius = D + D_buf;
    TruncatedSpace t;
    t.radius = radius;
    std::vector<std::pair<Vertex, double>> nbrs;
    // BFS by depth so the interior prefix property holds.
    t.verts.push_back(root());
    t.depth.push_back(0);
    t.index.emplace(root(), 0);
    std::size_t head = 0;
    while (head < t.verts.size()) {
        Vertex v = t.verts[head];
        int dv = t.depth[head];
        ++head;
        if (dv == radius) continue;
        neighbors(v, nbrs);
        for (const auto& [w, p] : nbrs) {
            if (t.index.count(w)) continue;
            if (t.verts.size() >= max_vertices)
                throw std::length_error("truncation exceeds the configured vertex budget");
            t.index.emplace(w, t.verts.size());
            t.verts.push_back(w);
            t.depth.push_back(dv + 1);
        }
    }
    // Stable partition: BFS order already sorts by depth, so the interior
    // is the prefix with depth < radius.
    t.interior_count = t.verts.size();
    for (std::size_t i = 0; i < t.verts.size(); ++i) {
        if (t.depth[i] == radius) { t.interior_count = i; break; }
    }
    t.rows.resize(t.interior_count);
    for (std::size_t i = 0; i < t.interior_count; ++i) {
        neighbors(t.verts[i], nbrs);
        for (const auto& [w, p] : nbrs) {
            auto it = t.index.find(w);
            if (it == t.index.end())
                throw std::logic_error("interior vertex has a neighbour outside the truncation");
            t.rows[i].emplace_back(it->second, p);
        }
    }
    return t;
}

}  // namespace bmc
