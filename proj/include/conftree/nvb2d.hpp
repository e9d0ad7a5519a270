#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conftree/arena.hpp"
#include "conftree/dyadic.hpp"
#include "conftree/tree.hpp"

namespace conftree::nvb {

using VertexId = std::uint32_t;
inline constexpr VertexId kNoVertex = 0xffffffffu;

/// Interned dyadic vertices: equal coordinates imply equal id. Doubles are
/// cached for the quadrature layer (exact, since all coordinates are dyadic
/// with small exponents).
class VertexPool {
public:
    VertexId intern(const DyadicPoint& p) {
        auto it = index_.find(p);
        if (it != index_.end()) return it->second;
        const VertexId id = static_cast<VertexId>(points_.size());
        points_.push_back(p);
        xs_.push_back(p.xd());
        ys_.push_back(p.yd());
        index_.emplace(p, id);
        return id;
    }

    const DyadicPoint& point(VertexId v) const { return points_[v]; }
    double x(VertexId v) const { return xs_[v]; }
    double y(VertexId v) const { return ys_[v]; }
    std::size_t size() const { return points_.size(); }

private:
    std::vector<DyadicPoint> points_;
    std::vector<double> xs_, ys_;
    std::unordered_map<DyadicPoint, VertexId, DyadicPointHash> index_;
};

/// Unordered vertex pair with canonical (sorted) representation.
struct EdgeKey {
    VertexId lo = kNoVertex, hi = kNoVertex;

    EdgeKey() = default;
    EdgeKey(VertexId a, VertexId b) : lo(a < b ? a : b), hi(a < b ? b : a) {}

    bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& e) const {
        return std::hash<std::uint64_t>{}((std::uint64_t{e.lo} << 32) | e.hi);
    }
};

/// Vertex ordering (a0, a1, a2): a1 is the newest vertex and the refinement
/// edge is a0-a2. Orientation is positive.
struct Triangle {
    std::array<VertexId, 3> v{kNoVertex, kNoVertex, kNoVertex};

    VertexId a0() const { return v[0]; }
    VertexId a1() const { return v[1]; }
    VertexId a2() const { return v[2]; }
    EdgeKey refinement_edge() const { return EdgeKey{v[0], v[2]}; }
    bool valid() const { return v[0] != kNoVertex; }
};

/// Edge-to-edge triangulation with a labeling in which every interior edge is
/// the refinement edge of both incident triangles or of neither.
struct InitialMesh {
    // Per triangle: (a0, a1, a2) as points, a1 newest, positive orientation.
    std::vector<std::array<DyadicPoint, 3>> triangles;
};

namespace detail {

struct PointTriangle {
    std::array<DyadicPoint, 3> p;
};

inline std::array<std::pair<int, int>, 3> tri_edge_slots() {
    return {std::make_pair(0, 1), std::make_pair(1, 2), std::make_pair(0, 2)};
}

}  // namespace detail

/// Checks the compatibility condition on an already-labeled mesh: every
/// interior edge is the refinement edge of both incident triangles or of
/// neither. Returns the offending edge description on failure.
std::optional<std::string> check_labeling(const InitialMesh& mesh);

/// Assigns vertex orderings to an unlabeled edge-to-edge triangulation so the
/// compatibility condition holds, by deterministic backtracking over the
/// three refinement-edge choices per triangle. Throws if no labeling exists.
InitialMesh compatible_initial_labeling(const std::vector<std::array<DyadicPoint, 3>>& tris);

/// L-shaped domain (-1/2,1/2)^2 minus [0,1/2]x[-1/2,0]: six right triangles,
/// one pair per unit subsquare, refinement edges on the diagonals through the
/// reentrant corner.
InitialMesh lshape_mesh();

/// Square (-1,1)^2 split by both diagonals into four triangles whose newest
/// vertex is the center.
InitialMesh square_mesh();

/// Geometry backend: newest-vertex bisection of an edge-to-edge initial mesh.
///
/// The arena is shared by refinement trees, the quadrature layer and the
/// enumeration oracle; cells are materialized on demand (neighbor discovery
/// expands ancestors of cells that no tree contains yet).
class NvbBackend {
public:
    static constexpr std::uint32_t max_patch_size = 2;

    explicit NvbBackend(const InitialMesh& mesh) {
        if (mesh.triangles.empty()) throw std::invalid_argument("empty initial mesh");
        if (auto bad = check_labeling(mesh))
            throw std::invalid_argument("initial mesh labeling is not compatible: " + *bad);
        root_ = arena_.add_root();
        tri_.push_back(Triangle{});  // synthetic slot; replaced below if single-cell
        if (mesh.triangles.size() == 1) {
            synthetic_root_ = false;
            tri_[root_] = intern_triangle(mesh.triangles[0]);
            initial_cells_ = {root_};
        } else {
            synthetic_root_ = true;
            const CellId first =
                arena_.create_children(root_, static_cast<std::uint32_t>(mesh.triangles.size()));
            tri_.resize(arena_.size());
            for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
                tri_[first + i] = intern_triangle(mesh.triangles[i]);
                initial_cells_.push_back(first + static_cast<CellId>(i));
            }
        }
        build_initial_adjacency();
    }

    CellId root() const { return root_; }
    bool has_synthetic_root() const { return synthetic_root_; }
    const std::vector<CellId>& initial_cells() const { return initial_cells_; }
    const CellArena& arena() const { return arena_; }
    const VertexPool& vertices() const { return verts_; }
    std::uint32_t generation(CellId c) const { return arena_.generation(c); }
    CellId parent(CellId c) const { return arena_.parent(c); }
    const Triangle& triangle(CellId c) const { return tri_[c]; }
    bool is_synthetic(CellId c) const { return synthetic_root_ && c == root_; }

    /// Tree the algorithms start from: the initial mesh, complexity 0.
    RefinementTree initial_tree() const {
        if (!synthetic_root_) return RefinementTree::single_cell(root_);
        return RefinementTree::forest(root_, initial_cells_);
    }

    double area(CellId c) const {
        const Triangle& t = tri_[c];
        return 0.5 * signed_area2(verts_.point(t.v[0]), verts_.point(t.v[1]),
                                  verts_.point(t.v[2]));
    }

    /// Children of `c`, creating them on first call: for (a0, a1, a2) with
    /// midpoint m of a0-a2 they are (a0, m, a1) and (a2, m, a1).
    std::pair<CellId, std::uint32_t> expand(CellId c) {
        if (arena_.expanded(c)) return {arena_.first_child(c), arena_.child_count(c)};
        if (is_synthetic(c)) throw std::logic_error("synthetic root expands at construction");
        const Triangle t = tri_[c];
        const VertexId m =
            verts_.intern(midpoint(verts_.point(t.v[0]), verts_.point(t.v[2])));
        const CellId first = arena_.create_children(c, 2);
        tri_.resize(arena_.size());
        tri_[first] = Triangle{{t.v[0], m, t.v[1]}};
        tri_[first + 1] = Triangle{{t.v[2], m, t.v[1]}};
        return {first, 2};
    }

    /// The unique patch containing `c`: {c} when the refinement edge lies on
    /// the domain boundary, else {c, mate} where the mate is the one other
    /// master-tree cell with the same refinement edge. Memoized; may expand
    /// the arena to materialize the mate.
    SubdivisionPatch subdivision_patch(CellId c) {
        if (is_synthetic(c)) return SubdivisionPatch{c};
        ensure_mate_slot(c);
        if (mate_[c] == kUnresolved) mate_[c] = find_mate(c);
        return mate_[c] == kNoCell ? SubdivisionPatch{c} : SubdivisionPatch{c, mate_[c]};
    }

    /// A patch contained in the leaves of `tree` that must be subdivided
    /// before (or as) `c` can be: follows the mate chain to coarser cells.
    SubdivisionPatch necessary_patch(const RefinementTree& tree, CellId c) {
        CellId cur = c;
        const std::uint32_t guard = arena_.generation(c) + 2;
        for (std::uint32_t step = 0; step <= guard; ++step) {
            SubdivisionPatch s = subdivision_patch(cur);
            CellId blocker = kNoCell;
            for (CellId x : s.cells)
                if (!tree.is_leaf(x)) blocker = x;
            if (blocker == kNoCell) return s;
            // The blocker is not materialized in the tree; its first in-tree
            // ancestor is a leaf whose subdivision is a prerequisite.
            CellId b = blocker;
            while (b != kNoCell && !tree.is_leaf(b)) b = arena_.parent(b);
            if (b == kNoCell)
                throw std::logic_error("necessary_patch: tree is not conforming");
            cur = b;
        }
        throw std::logic_error("necessary_patch: chain did not terminate");
    }

    /// Edge-to-edge check by edge-hash counting: every leaf edge is either
    /// matched by exactly one other leaf edge or lies on the domain boundary.
    bool is_conforming(const RefinementTree& tree) const {
        if (tree.leaf_count() == 1 && tree.leaves()[0] == root_) return true;
        std::unordered_map<EdgeKey, int, EdgeKeyHash> count;
        count.reserve(tree.leaf_count() * 2);
        for (CellId c : tree.leaves()) {
            const Triangle& t = tri_[c];
            for (auto [i, j] : detail::tri_edge_slots()) ++count[EdgeKey{t.v[i], t.v[j]}];
        }
        for (const auto& [e, k] : count) {
            if (k == 2) continue;
            if (k == 1 && edge_on_domain_boundary(e)) continue;
            return false;
        }
        return true;
    }

    /// Smallest conforming tree containing `tree`: fixpoint closure that
    /// forces the patch mate of every internal cell to be internal as well.
    RefinementTree complete(const RefinementTree& tree) {
        RefinementTree out = tree;
        std::vector<CellId> work = internal_cells(out);
        std::size_t steps = 0;
        while (!work.empty()) {
            if (++steps > 10'000'000) throw std::runtime_error("completion did not terminate");
            const CellId x = work.back();
            work.pop_back();
            if (is_synthetic(x)) continue;
            SubdivisionPatch s = subdivision_patch(x);
            for (CellId m : s.cells) {
                if (m == x) continue;
                // Build the chain from the first in-tree ancestor down to m,
                // subdividing every cell on the way; each one becomes internal
                // and needs its own mate forced in turn.
                std::vector<CellId> chain;
                CellId b = m;
                while (!out.is_leaf(b) && !internal_in(out, b)) {
                    chain.push_back(b);
                    b = arena_.parent(b);
                    if (b == kNoCell) throw std::logic_error("completion: lost ancestor chain");
                }
                if (!out.is_leaf(b)) continue;  // m is already internal
                chain.push_back(b);
                for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
                    out.subdivide_cell_raw(*this, *it);
                    work.push_back(*it);
                }
            }
        }
        return out;
    }

    /// True iff the edge lies on the boundary of the initial domain.
    bool edge_on_domain_boundary(const EdgeKey& e) const {
        auto it = boundary_memo_.find(e);
        if (it != boundary_memo_.end()) return it->second;
        const DyadicPoint& p = verts_.point(e.lo);
        const DyadicPoint& q = verts_.point(e.hi);
        bool on = false;
        for (const auto& [a, b] : boundary_segments_) {
            if (segment_contains(verts_.point(a), verts_.point(b), p, q)) {
                on = true;
                break;
            }
        }
        boundary_memo_.emplace(e, on);
        return on;
    }

private:
    static constexpr CellId kUnresolved = 0xfffffffeu;

    Triangle intern_triangle(const std::array<DyadicPoint, 3>& pts) {
        if (signed_area2(pts[0], pts[1], pts[2]) <= 0.0)
            throw std::invalid_argument("initial triangle is not positively oriented");
        return Triangle{{verts_.intern(pts[0]), verts_.intern(pts[1]), verts_.intern(pts[2])}};
    }

    void build_initial_adjacency() {
        std::unordered_map<EdgeKey, std::vector<CellId>, EdgeKeyHash> inc;
        for (CellId c : initial_cells_) {
            const Triangle& t = tri_[c];
            for (auto [i, j] : detail::tri_edge_slots())
                inc[EdgeKey{t.v[i], t.v[j]}].push_back(c);
        }
        for (const auto& [e, cells] : inc) {
            if (cells.size() == 1) {
                boundary_segments_.emplace_back(e.lo, e.hi);
            } else if (cells.size() == 2) {
                initial_neighbor_[e] = {cells[0], cells[1]};
            } else {
                throw std::invalid_argument("initial mesh is not edge-to-edge");
            }
        }
        std::sort(boundary_segments_.begin(), boundary_segments_.end());
    }

    void ensure_mate_slot(CellId c) {
        if (mate_.size() < arena_.size()) mate_.resize(arena_.size(), kUnresolved);
        (void)c;
    }

    bool internal_in(const RefinementTree& t, CellId c) const {
        // Internal means: in the tree and subdivided there. A cell is in the
        // tree iff some leaf is it or descends from it; cheaper: c is internal
        // iff its children exist and the subtree below is part of the tree,
        // which for full trees is equivalent to: c is an ancestor of a leaf
        // and not a leaf. We test by walking up from c: c is in the tree iff
        // walking up from any leaf... instead use: c internal iff c not leaf
        // and its first child's chain reaches a leaf going down. Full trees
        // make this simple: c is in the tree iff c == root or c's parent is
        // internal; recursion bottoms out quickly via the leaf test.
        if (t.is_leaf(c)) return false;
        if (!arena_.expanded(c)) return false;
        // Descend: in a full tree, c is internal iff each downward path hits
        // a leaf; testing one path suffices when the tree is full.
        CellId cur = c;
        while (true) {
            if (t.is_leaf(cur)) return true;
            if (!arena_.expanded(cur)) return false;
            cur = arena_.first_child(cur);
        }
    }

    std::vector<CellId> internal_cells(const RefinementTree& t) const {
        std::vector<CellId> result;
        std::vector<CellId> seen;
        for (CellId leaf : t.leaves()) {
            CellId p = arena_.parent(leaf);
            while (p != kNoCell) {
                if (std::binary_search(seen.begin(), seen.end(), p)) break;
                seen.insert(std::lower_bound(seen.begin(), seen.end(), p), p);
                result.push_back(p);
                p = arena_.parent(p);
            }
        }
        return result;
    }

    std::array<std::pair<VertexId, VertexId>, 3> edges_of(CellId c) const {
        const Triangle& t = tri_[c];
        return {std::make_pair(t.v[0], t.v[1]), std::make_pair(t.v[1], t.v[2]),
                std::make_pair(t.v[0], t.v[2])};
    }

    bool edge_within_cell_boundary(CellId a, const DyadicPoint& p, const DyadicPoint& q,
                                   int* slot = nullptr) const {
        const Triangle& t = tri_[a];
        int k = 0;
        for (auto [i, j] : detail::tri_edge_slots()) {
            if (segment_contains(verts_.point(t.v[i]), verts_.point(t.v[j]), p, q)) {
                if (slot) *slot = k;
                return true;
            }
            ++k;
        }
        return false;
    }

    /// The other master-tree cell sharing c's refinement edge, or kNoCell if
    /// that edge lies on the domain boundary. Ascends on c's side while the
    /// edge stays on the ancestor's boundary, then descends the opposite
    /// subtree by exact segment containment, expanding as needed.
    CellId find_mate(CellId c) {
        const Triangle tc = tri_[c];
        const DyadicPoint ra = verts_.point(tc.v[0]);
        const DyadicPoint rb = verts_.point(tc.v[2]);
        const EdgeKey target{tc.v[0], tc.v[2]};

        CellId a = c;
        CellId d = kNoCell;
        while (true) {
            const CellId p = arena_.parent(a);
            if (p == kNoCell || is_synthetic(p)) {
                // `a` is an initial cell (or the single root triangle).
                int slot = -1;
                if (!edge_within_cell_boundary(a, ra, rb, &slot))
                    throw std::logic_error("refinement edge escaped its initial cell");
                const auto es = detail::tri_edge_slots()[slot];
                const EdgeKey carrier{tri_[a].v[es.first], tri_[a].v[es.second]};
                auto it = initial_neighbor_.find(carrier);
                if (it == initial_neighbor_.end()) return kNoCell;  // domain boundary
                d = it->second.first == a ? it->second.second : it->second.first;
                break;
            }
            if (edge_within_cell_boundary(p, ra, rb)) {
                a = p;
                continue;
            }
            // The edge lies on the bisector of p: the opposite side is the
            // sibling subtree.
            const CellId first = arena_.first_child(p);
            d = (a == first) ? first + 1 : first;
            break;
        }

        const std::uint32_t gen_c = arena_.generation(c);
        while (true) {
            const Triangle& td = tri_[d];
            if (td.refinement_edge() == target) {
                if (arena_.generation(d) != gen_c)
                    throw std::logic_error("mate generation mismatch (incompatible labeling?)");
                return d;
            }
            if (arena_.generation(d) >= gen_c)
                throw std::logic_error("mate descent overshot (incompatible labeling?)");
            const auto [first, count] = expand(d);
            (void)count;
            // Refinement edge of d is v0-v2 with midpoint m = child's a1 slot.
            const VertexId m = tri_[first].v[1];
            // Which child's boundary carries the target segment?
            const DyadicPoint pm = verts_.point(m);
            const DyadicPoint p0 = verts_.point(td.v[0]);
            const DyadicPoint p2 = verts_.point(td.v[2]);
            const DyadicPoint p1 = verts_.point(td.v[1]);
            if (segment_contains(p0, p1, ra, rb) || segment_contains(p0, pm, ra, rb)) {
                d = first;  // child (a0, m, a1)
            } else if (segment_contains(p2, p1, ra, rb) || segment_contains(p2, pm, ra, rb)) {
                d = first + 1;  // child (a2, m, a1)
            } else if (segment_contains(pm, p1, ra, rb)) {
                // On the new bisector: both children carry it; impossible for
                // a mate search (the target came from the other side of d's
                // subtree boundary).
                throw std::logic_error("mate descent entered the bisector");
            } else {
                throw std::logic_error("mate descent lost the refinement edge");
            }
        }
    }

    CellArena arena_;
    VertexPool verts_;
    std::vector<Triangle> tri_;
    std::vector<CellId> mate_;
    CellId root_ = kNoCell;
    bool synthetic_root_ = false;
    std::vector<CellId> initial_cells_;
    std::vector<std::pair<VertexId, VertexId>> boundary_segments_;
    std::unordered_map<EdgeKey, std::pair<CellId, CellId>, EdgeKeyHash> initial_neighbor_;
    mutable std::unordered_map<EdgeKey, bool, EdgeKeyHash> boundary_memo_;
};

// --- initial meshes ---------------------------------------------------------

inline std::optional<std::string> check_labeling(const InitialMesh& mesh) {
    // Map undirected point-pair edges to the triangles using them, tracking
    // whether the edge is the refinement edge (a0-a2) of each.
    struct Use {
        int tri;
        bool is_refinement;
    };
    std::vector<std::pair<std::array<DyadicPoint, 2>, Use>> uses;
    auto canon = [](DyadicPoint a, DyadicPoint b) {
        const bool swap = (b.x < a.x) || (b.x == a.x && b.y < a.y);
        return swap ? std::array<DyadicPoint, 2>{b, a} : std::array<DyadicPoint, 2>{a, b};
    };
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tr = mesh.triangles[t];
        const std::array<std::pair<int, int>, 3> slots{{{0, 1}, {1, 2}, {0, 2}}};
        for (auto [i, j] : slots) {
            uses.push_back({canon(tr[i], tr[j]),
                            Use{static_cast<int>(t), (i == 0 && j == 2)}});
        }
    }
    for (std::size_t i = 0; i < uses.size(); ++i) {
        for (std::size_t j = i + 1; j < uses.size(); ++j) {
            if (uses[i].first == uses[j].first &&
                uses[i].second.is_refinement != uses[j].second.is_refinement) {
                return "edge shared by triangles " + std::to_string(uses[i].second.tri) +
                       " and " + std::to_string(uses[j].second.tri) +
                       " is the refinement edge of exactly one";
            }
        }
    }
    return std::nullopt;
}

inline InitialMesh compatible_initial_labeling(
    const std::vector<std::array<DyadicPoint, 3>>& tris) {
    const std::size_t n = tris.size();
    if (n == 0) throw std::invalid_argument("empty triangulation");

    // Edge incidence over canonical point pairs.
    struct PairHash {
        std::size_t operator()(const std::array<DyadicPoint, 2>& e) const {
            DyadicPointHash h;
            return h(e[0]) * 1000003u ^ h(e[1]);
        }
    };
    auto canon = [](DyadicPoint a, DyadicPoint b) {
        const bool swap = (b.x < a.x) || (b.x == a.x && b.y < a.y);
        return swap ? std::array<DyadicPoint, 2>{b, a} : std::array<DyadicPoint, 2>{a, b};
    };
    // For triangle t, choice k means: the refinement edge is the one opposite
    // vertex k (edge between the other two vertices).
    auto edge_of_choice = [&](std::size_t t, int k) {
        const int i = (k + 1) % 3, j = (k + 2) % 3;
        return canon(tris[t][i], tris[t][j]);
    };
    std::unordered_map<std::array<DyadicPoint, 2>, std::vector<std::pair<int, int>>, PairHash>
        incident;  // edge -> (triangle, choice giving this edge)
    for (std::size_t t = 0; t < n; ++t)
        for (int k = 0; k < 3; ++k) incident[edge_of_choice(t, k)].push_back({(int)t, k});

    std::vector<int> choice(n, -1);
    // Compatibility across a shared edge e = {t1 with choice k1, t2 with k2}:
    // (choice[t1] == k1) must equal (choice[t2] == k2).
    auto consistent = [&](std::size_t t) {
        for (int k = 0; k < 3; ++k) {
            const auto& inc = incident[edge_of_choice(t, k)];
            if (inc.size() != 2) continue;
            const auto& other = inc[0].first == static_cast<int>(t) ? inc[1] : inc[0];
            if (choice[other.first] < 0) continue;
            const bool mine = (choice[t] == k);
            const bool theirs = (choice[other.first] == other.second);
            if (mine != theirs) return false;
        }
        return true;
    };
    // Deterministic depth-first search, smallest choice first.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t pos = 0;
    std::vector<int> stack;
    while (pos < n) {
        bool advanced = false;
        for (int k = choice[order[pos]] + 1; k < 3; ++k) {
            choice[order[pos]] = k;
            if (consistent(order[pos])) {
                stack.push_back(static_cast<int>(pos));
                ++pos;
                if (pos < n) choice[order[pos]] = -1;
                advanced = true;
                break;
            }
        }
        if (!advanced) {
            choice[order[pos]] = -1;
            if (stack.empty())
                throw std::runtime_error("no compatible labeling found for the initial mesh");
            pos = static_cast<std::size_t>(stack.back());
            stack.pop_back();
        }
    }

    InitialMesh mesh;
    mesh.triangles.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const int k = choice[t];
        DyadicPoint a1 = tris[t][k];
        DyadicPoint a0 = tris[t][(k + 1) % 3];
        DyadicPoint a2 = tris[t][(k + 2) % 3];
        if (signed_area2(a0, a1, a2) < 0.0) std::swap(a0, a2);
        if (signed_area2(a0, a1, a2) <= 0.0)
            throw std::invalid_argument("degenerate triangle in the triangulation");
        mesh.triangles.push_back({a0, a1, a2});
    }
    if (auto bad = check_labeling(mesh))
        throw std::logic_error("labeling search produced an incompatible labeling: " + *bad);
    return mesh;
}

inline InitialMesh lshape_mesh() {
    auto d = [](int num, int exp) { return Dyadic::make(num, exp); };
    auto P = [&](int xn, int yn) { return DyadicPoint{d(xn, 1), d(yn, 1)}; };
    // Coordinates in halves: P(-1,-1) = (-1/2, -1/2) etc.
    InitialMesh m;
    m.triangles = {
        {P(-1, -1), P(0, -1), P(0, 0)},  // lower-left square, below diagonal
        {P(0, 0), P(-1, 0), P(-1, -1)},  // lower-left square, above diagonal
        {P(-1, 1), P(-1, 0), P(0, 0)},   // upper-left square
        {P(0, 0), P(0, 1), P(-1, 1)},    //
        {P(0, 0), P(1, 0), P(1, 1)},     // upper-right square
        {P(1, 1), P(0, 1), P(0, 0)},     //
    };
    if (auto bad = check_labeling(m)) throw std::logic_error("lshape labeling: " + *bad);
    return m;
}

inline InitialMesh square_mesh() {
    auto P = [](int x, int y) { return DyadicPoint{Dyadic::from_int(x), Dyadic::from_int(y)}; };
    const DyadicPoint c = P(0, 0);
    InitialMesh m;
    m.triangles = {
        {P(1, -1), c, P(-1, -1)},  // bottom
        {P(1, 1), c, P(1, -1)},    // right
        {P(-1, 1), c, P(1, 1)},    // top
        {P(-1, -1), c, P(-1, 1)},  // left
    };
    if (auto bad = check_labeling(m)) throw std::logic_error("square labeling: " + *bad);
    return m;
}

/// Incremental edge bookkeeping for a single evolving tree: conformity after
/// each subdivision in O(1) hash updates instead of a full scan.
class ConformityTracker {
public:
    ConformityTracker(const NvbBackend& backend, const RefinementTree& tree)
        : backend_(&backend) {
        for (CellId c : tree.leaves()) add_cell(c);
    }

    /// Call after `tree.subdivide_patch`: parents of `patch` were replaced by
    /// their children.
    void apply_subdivision(const SubdivisionPatch& patch, const NvbBackend& backend) {
        for (CellId c : patch.cells) {
            remove_cell(c);
            const auto first = backend.arena().first_child(c);
            const auto count = backend.arena().child_count(c);
            for (std::uint32_t i = 0; i < count; ++i) add_cell(first + i);
        }
    }

    bool conforming() const { return bad_edges_ == 0; }

private:
    struct Entry {
        int count = 0;
        signed char boundary = -1;  // lazily resolved
    };

    bool is_boundary(const EdgeKey& e, Entry& entry) {
        if (entry.boundary < 0)
            entry.boundary = backend_->edge_on_domain_boundary(e) ? 1 : 0;
        return entry.boundary == 1;
    }

    bool entry_bad(const EdgeKey& e, Entry& entry) {
        if (entry.count == 0 || entry.count == 2) return false;
        if (entry.count == 1) return !is_boundary(e, entry);
        return true;
    }

    void bump(const EdgeKey& e, int delta) {
        Entry& entry = edges_[e];
        const bool was_bad = entry_bad(e, entry);
        entry.count += delta;
        const bool now_bad = entry_bad(e, entry);
        bad_edges_ += static_cast<int>(now_bad) - static_cast<int>(was_bad);
    }

    void add_cell(CellId c) {
        const Triangle& t = backend_->triangle(c);
        for (auto [i, j] : detail::tri_edge_slots()) bump(EdgeKey{t.v[i], t.v[j]}, +1);
    }

    void remove_cell(CellId c) {
        const Triangle& t = backend_->triangle(c);
        for (auto [i, j] : detail::tri_edge_slots()) bump(EdgeKey{t.v[i], t.v[j]}, -1);
    }

    const NvbBackend* backend_;
    std::unordered_map<EdgeKey, Entry, EdgeKeyHash> edges_;
    long bad_edges_ = 0;
};

}  // namespace conftree::nvb
