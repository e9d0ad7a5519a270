#pragma once

// Test-only oracles, deliberately independent of the library code paths they
// cross-check: exact area accounting, the pairwise vertex-set conformity
// definition, a geometry-keyed enumeration of conforming states, exhaustive
// labeling search, and an exact integrator for quadratic data.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "conftree/dyadic.hpp"
#include "conftree/nvb2d.hpp"
#include "conftree/tree.hpp"

namespace support {

using conftree::CellId;
using conftree::Dyadic;
using conftree::DyadicPoint;
using conftree::RefinementTree;
using conftree::nvb::NvbBackend;

// --- exact area sums ---------------------------------------------------------

struct ExactArea2 {
    __int128 num = 0;       // twice the area, scaled
    std::uint32_t exp2 = 0;  // denominator exponent: value = num / 2^exp2
};

inline ExactArea2 exact_area2(const DyadicPoint& p, const DyadicPoint& q, const DyadicPoint& r) {
    std::uint32_t e = 0;
    for (const auto* pt : {&p, &q, &r}) {
        e = std::max({e, pt->x.exp, pt->y.exp});
    }
    auto num = [&](const Dyadic& d) { return d.num << (e - d.exp); };
    const std::int64_t ux = num(q.x) - num(p.x), uy = num(q.y) - num(p.y);
    const std::int64_t vx = num(r.x) - num(p.x), vy = num(r.y) - num(p.y);
    return ExactArea2{static_cast<__int128>(ux) * vy - static_cast<__int128>(uy) * vx, 2 * e};
}

inline ExactArea2 add(ExactArea2 a, ExactArea2 b) {
    const std::uint32_t e = std::max(a.exp2, b.exp2);
    return ExactArea2{(a.num << (e - a.exp2)) + (b.num << (e - b.exp2)), e};
}

inline bool equal(ExactArea2 a, ExactArea2 b) {
    const std::uint32_t e = std::max(a.exp2, b.exp2);
    return (a.num << (e - a.exp2)) == (b.num << (e - b.exp2));
}

inline ExactArea2 exact_leaf_area2_sum(const NvbBackend& backend,
                                       const std::vector<CellId>& leaves) {
    ExactArea2 total;
    for (CellId c : leaves) {
        const auto& t = backend.triangle(c);
        const auto& vp = backend.vertices();
        total = add(total, exact_area2(vp.point(t.v[0]), vp.point(t.v[1]), vp.point(t.v[2])));
    }
    return total;
}

inline ExactArea2 initial_mesh_area2(const conftree::nvb::InitialMesh& mesh) {
    ExactArea2 total;
    for (const auto& t : mesh.triangles) total = add(total, exact_area2(t[0], t[1], t[2]));
    return total;
}

// --- conformity by the vertex-set definition ----------------------------------

/// Edge-to-edge by definition: no vertex of one leaf lies strictly inside an
/// edge of another leaf. Pairwise and geometric, no hashing.
inline bool vertex_set_conforming(const NvbBackend& backend, const std::vector<CellId>& leaves) {
    const auto& vp = backend.vertices();
    for (CellId a : leaves) {
        const auto& ta = backend.triangle(a);
        for (CellId b : leaves) {
            if (a == b) continue;
            const auto& tb = backend.triangle(b);
            for (int i = 0; i < 3; ++i) {
                const auto v = ta.v[i];
                if (v == tb.v[0] || v == tb.v[1] || v == tb.v[2]) continue;
                const DyadicPoint& p = vp.point(v);
                const std::array<std::pair<int, int>, 3> slots{{{0, 1}, {1, 2}, {0, 2}}};
                for (auto [s0, s1] : slots) {
                    const DyadicPoint& e0 = vp.point(tb.v[s0]);
                    const DyadicPoint& e1 = vp.point(tb.v[s1]);
                    if (p == e0 || p == e1) continue;
                    if (conftree::on_segment(p, e0, e1)) return false;
                }
            }
        }
    }
    return true;
}

// --- independent conforming-state enumeration ----------------------------------
//
// States are keyed by sorted vertex-coordinate strings rather than cell ids,
// and patch discovery groups leaves by their refinement edge instead of going
// through the backend's mate search.

inline std::string geometry_key(const NvbBackend& backend, const std::vector<CellId>& leaves) {
    const auto& vp = backend.vertices();
    std::vector<std::string> parts;
    parts.reserve(leaves.size());
    for (CellId c : leaves) {
        const auto& t = backend.triangle(c);
        std::string s;
        for (int k = 0; k < 3; ++k) {
            const DyadicPoint& p = vp.point(t.v[k]);
            s += std::to_string(p.x.num) + "/" + std::to_string(p.x.exp) + "," +
                 std::to_string(p.y.num) + "/" + std::to_string(p.y.exp) + ";";
        }
        parts.push_back(std::move(s));
    }
    std::sort(parts.begin(), parts.end());
    std::string key;
    for (auto& p : parts) key += p + "|";
    return key;
}

/// Number of conforming states at each complexity level, counted by a
/// recursive expansion with geometry-canonical deduplication.
inline std::vector<std::size_t> independent_state_counts(NvbBackend& backend,
                                                         const RefinementTree& initial,
                                                         std::size_t n_max) {
    // Domain boundary segments straight from the initial tree's leaf edges.
    struct Seg {
        DyadicPoint a, b;
    };
    std::vector<Seg> boundary;
    {
        std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
        const auto& vp = backend.vertices();
        for (CellId c : initial.leaves()) {
            const auto& t = backend.triangle(c);
            const std::array<std::pair<int, int>, 3> slots{{{0, 1}, {1, 2}, {0, 2}}};
            for (auto [i, j] : slots) {
                auto key = std::minmax(t.v[i], t.v[j]);
                ++count[{key.first, key.second}];
            }
        }
        for (const auto& [k, n] : count)
            if (n == 1) boundary.push_back({vp.point(k.first), vp.point(k.second)});
    }
    auto on_boundary = [&](const DyadicPoint& p, const DyadicPoint& q) {
        for (const auto& s : boundary)
            if (conftree::segment_contains(s.a, s.b, p, q)) return true;
        return false;
    };

    std::vector<std::set<std::string>> levels(n_max + 1);
    std::vector<std::vector<std::vector<CellId>>> frontier(n_max + 1);
    levels[0].insert(geometry_key(backend, initial.leaves()));
    frontier[0].push_back(initial.leaves());

    for (std::size_t n = 0; n < n_max; ++n) {
        for (const auto& leaves : frontier[n]) {
            // Group leaves by refinement edge.
            std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<CellId>> by_redge;
            const auto& vp = backend.vertices();
            for (CellId c : leaves) {
                const auto& t = backend.triangle(c);
                auto key = std::minmax(t.v[0], t.v[2]);
                by_redge[{key.first, key.second}].push_back(c);
            }
            std::vector<std::vector<CellId>> moves;
            for (const auto& [e, cells] : by_redge) {
                if (cells.size() == 2) {
                    moves.push_back(cells);
                } else if (cells.size() == 1 &&
                           on_boundary(vp.point(e.first), vp.point(e.second))) {
                    moves.push_back(cells);
                }
            }
            for (const auto& patch : moves) {
                std::vector<CellId> succ;
                for (CellId c : leaves)
                    if (std::find(patch.begin(), patch.end(), c) == patch.end())
                        succ.push_back(c);
                for (CellId c : patch) {
                    const auto [first, cnt] = backend.expand(c);
                    for (std::uint32_t i = 0; i < cnt; ++i) succ.push_back(first + i);
                }
                std::sort(succ.begin(), succ.end());
                if (levels[n + 1].insert(geometry_key(backend, succ)).second)
                    frontier[n + 1].push_back(std::move(succ));
            }
        }
    }
    std::vector<std::size_t> counts;
    for (const auto& lv : levels) counts.push_back(lv.size());
    return counts;
}

// --- exhaustive labeling search -------------------------------------------------

/// All compatible labelings of a small triangulation, as vectors of
/// refinement-edge choices (choice k = edge opposite vertex k). Brute force
/// over 3^n assignments.
inline std::vector<std::vector<int>> all_compatible_labelings(
    const std::vector<std::array<DyadicPoint, 3>>& tris) {
    const std::size_t n = tris.size();
    auto canon = [](DyadicPoint a, DyadicPoint b) {
        const bool swap = (b.x < a.x) || (b.x == a.x && b.y < a.y);
        return swap ? std::array<DyadicPoint, 2>{b, a} : std::array<DyadicPoint, 2>{a, b};
    };
    auto redge = [&](std::size_t t, int k) {
        return canon(tris[t][(k + 1) % 3], tris[t][(k + 2) % 3]);
    };
    std::vector<std::vector<int>> valid;
    std::vector<int> choice(n, 0);
    const std::size_t total = [&] {
        std::size_t p = 1;
        for (std::size_t i = 0; i < n; ++i) p *= 3;
        return p;
    }();
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            choice[i] = static_cast<int>(c % 3);
            c /= 3;
        }
        bool ok = true;
        for (std::size_t i = 0; ok && i < n; ++i) {
            for (std::size_t j = i + 1; ok && j < n; ++j) {
                // Shared edge?
                for (int ki = 0; ki < 3 && ok; ++ki) {
                    for (int kj = 0; kj < 3 && ok; ++kj) {
                        if (redge(i, ki) == redge(j, kj)) {
                            const bool ri = choice[i] == ki;
                            const bool rj = choice[j] == kj;
                            if (ri != rj) ok = false;
                        }
                    }
                }
            }
        }
        if (ok) valid.push_back(choice);
    }
    return valid;
}

// --- exact integrator for quadratic data ----------------------------------------

/// Edge-midpoint rule: exact for polynomials of total degree <= 2. Used as
/// the closed-form oracle for the H1 local error of quadratic targets.
template <typename F>
double integrate_quadratic(const std::array<std::array<double, 2>, 3>& tri, F&& f) {
    const double area =
        0.5 * std::abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) -
                       (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0]));
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        s += f(0.5 * (tri[i][0] + tri[j][0]), 0.5 * (tri[i][1] + tri[j][1]));
    }
    return area * s / 3.0;
}

/// H1 local error of a target with affine gradient (quadratic u), exactly.
template <typename GradFn>
double quadratic_h1_error(const std::array<std::array<double, 2>, 3>& tri, GradFn&& grad) {
    const double area =
        0.5 * std::abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) -
                       (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0]));
    const double a = integrate_quadratic(tri, [&](double x, double y) {
        const auto g = grad(x, y);
        return g[0] * g[0] + g[1] * g[1];
    });
    const double bx = integrate_quadratic(tri, [&](double x, double y) { return grad(x, y)[0]; });
    const double by = integrate_quadratic(tri, [&](double x, double y) { return grad(x, y)[1]; });
    return a - (bx * bx + by * by) / area;
}

/// Deterministic LCG so randomized tests are reproducible without any global
/// seeding machinery.
struct Lcg {
    std::uint64_t state;
    explicit Lcg(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        return state >> 11;
    }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    double unit() {
        return static_cast<double>(next() % (1ull << 53)) / static_cast<double>(1ull << 53);
    }
};

}  // namespace support
