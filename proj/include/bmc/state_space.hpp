#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bmc/rng.hpp"

namespace bmc {

/// Vertex handle. For tree / free-group spaces this is the reduced word
/// itself, packed into one 64-bit code (length in the top 6 bits, letters
/// from the LSB up at a fixed number of bits per letter). For explicit
/// spaces it is the state index. Populations key directly on these codes,
/// so holding millions of particle positions costs 8 bytes per distinct
/// site and no intern table.
using Vertex = std::uint64_t;

enum class SpaceKind { tree, free_group, explicit_kernel };

/// Step law for word spaces. `simple` is the uniform nearest-neighbour
/// walk; `generator_weights` assigns one probability per letter (a random
/// walk law, translation invariant); `radial` gives probability `back`
/// toward the root and splits the rest evenly among the other directions,
/// with the uniform law at the root itself.
struct StepLaw {
    enum class Kind { simple, generator_weights, radial };
    Kind kind = Kind::simple;
    std::vector<double> weights;
    double back = 0.0;
};

/// Packed-word codec shared by the tree and free-group spaces.
struct WordCodec {
    int alphabet = 0;    // number of letters
    int bits = 0;        // bits per letter
    int max_len = 0;
    bool involutive = false;  // tree letters are their own inverses

    static constexpr int kLenShift = 58;

    static WordCodec make(int alphabet, bool involutive);

    int len(Vertex v) const { return static_cast<int>(v >> kLenShift); }
    int letter(Vertex v, int i) const {
        return static_cast<int>((v >> (i * bits)) & ((1u << bits) - 1));
    }
    int last(Vertex v) const { return letter(v, len(v) - 1); }
    int inverse(int l) const { return involutive ? l : (l ^ 1); }

    Vertex pop(Vertex v) const;
    Vertex push_raw(Vertex v, int l) const;     // no reduction, throws on overflow
    Vertex push_reduced(Vertex v, int l) const; // cancels (l, inv(l)) pairs
    Vertex reduce(const std::vector<int>& letters) const;
    /// Stack reduction of an arbitrary letter sequence; no packing limit.
    std::vector<int> reduce_letters(const std::vector<int>& letters) const;
    int common_prefix(Vertex a, Vertex b) const;
};

struct TruncatedSpace;

/// A countable state space with a finite-support transition kernel.
/// Immutable after construction; safe to share across threads.
class Space {
public:
    static Space tree(int degree, StepLaw law);
    static Space free_group(int rank, StepLaw law);
    static Space explicit_kernel(std::vector<std::string> states,
                                 std::vector<std::vector<double>> matrix);

    SpaceKind kind() const { return kind_; }
    const WordCodec& codec() const { return codec_; }
    const StepLaw& step_law() const { return law_; }
    Vertex root() const { return 0; }
    bool is_word_space() const { return kind_ != SpaceKind::explicit_kernel; }
    int degree() const { return degree_; }  // word spaces only
    std::size_t state_count() const { return states_.size(); }  // explicit only
    bool nearest_neighbour() const;

    /// Group-invariant word-space laws (simple / generator_weights) expose
    /// one probability per letter; radial laws are position dependent.
    bool group_invariant() const;
    double letter_prob(int l) const;  // group-invariant laws only

    void neighbors(Vertex x, std::vector<std::pair<Vertex, double>>& out) const;
    std::vector<std::pair<Vertex, double>> neighbors(Vertex x) const;
    Vertex sample_step(Vertex x, Rng& rng) const;
    std::int64_t distance(Vertex x, Vertex y) const;

    Vertex parent(Vertex x) const;  // word spaces, x != root
    std::string vertex_name(Vertex x) const;
    Vertex parse_vertex(const std::string& name) const;

    TruncatedSpace truncate(int D, int D_buf, std::size_t max_vertices = 2000000) const;

    void validate_vertex(Vertex x) const;

private:
    SpaceKind kind_ = SpaceKind::tree;
    WordCodec codec_;
    StepLaw law_;
    int degree_ = 0;  // vertex degree for word spaces (= alphabet size)
    // explicit kernels
    std::vector<std::string> states_;
    std::vector<std::vector<std::pair<int, double>>> rows_;
    std::unordered_map<std::string, int> state_index_;
};

/// Finite ball around the root with absorbing front, the substrate for the
/// linear-solve oracles. Interior vertices are those at distance < radius;
/// all of their neighbours are inside the ball.
struct TruncatedSpace {
    std::vector<Vertex> verts;  // BFS order from root; prefix = interior
    std::unordered_map<Vertex, std::size_t> index;
    std::vector<int> depth;
    std::size_t interior_count = 0;
    int radius = 0;
    // transition rows for interior vertices, destinations as ball indices
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;

    bool is_front(std::size_t i) const { return i >= interior_count; }
};

}  // namespace bmc
