#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "conftree/arena.hpp"
#include "conftree/tree.hpp"

namespace conftree::oracle {

/// Canonical mesh state: the sorted leaf set. States reached through
/// different patch orders coincide here.
struct MeshState {
    std::vector<CellId> leaves;

    bool operator==(const MeshState&) const = default;
};

namespace detail {

// 128-bit mixing digest of a leaf vector; used for the visited set so that a
// million states cost 16 bytes each instead of a stored vector. Collisions
// are astronomically unlikely and the enumeration is cross-checked against an
// independent enumerator in the tests.
struct Digest {
    std::uint64_t a = 0, b = 0;
    bool operator==(const Digest&) const = default;
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const { return d.a ^ (d.b * 0x9e3779b97f4a7c15ull); }
};

inline Digest digest_of(const std::vector<CellId>& v) {
    auto mix = [](std::uint64_t h, std::uint64_t x) {
        h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
        return h;
    };
    Digest d{0x243f6a8885a308d3ull, 0x13198a2e03707344ull};
    for (CellId c : v) {
        d.a = mix(d.a, c);
        d.b = mix(d.b, ~std::uint64_t{c});
    }
    return d;
}

}  // namespace detail

struct EnumerationResult {
    // states[n] holds every conforming state of complexity exactly
    // initial_complexity + n reachable from the initial tree.
    std::vector<std::vector<MeshState>> states;
    bool capped = false;
    std::size_t total_states = 0;
};

/// All conforming trees reachable from `initial` by at most `n_max` patch
/// subdivisions, each state exactly once. Transitions subdivide a patch fully
/// contained in the current leaves; by patch isolation every successor is
/// conforming again.
template <typename Backend>
EnumerationResult enumerate_conforming(Backend& backend, const RefinementTree& initial,
                                       std::size_t n_max, std::size_t state_cap = 10'000'000) {
    EnumerationResult result;
    std::unordered_set<detail::Digest, detail::DigestHash> visited;

    MeshState start{initial.leaves()};
    visited.insert(detail::digest_of(start.leaves));
    result.states.push_back({start});
    result.total_states = 1;

    for (std::size_t level = 0; level < n_max; ++level) {
        const auto& frontier = result.states[level];
        std::vector<MeshState> next;
        for (const MeshState& st : frontier) {
            // Distinct available patches, keyed by their smallest member.
            std::vector<SubdivisionPatch> moves;
            for (CellId c : st.leaves) {
                SubdivisionPatch p = backend.subdivision_patch(c);
                if (p.cells.front() != c) continue;  // count each patch once
                bool inside = true;
                for (CellId x : p.cells)
                    inside = inside &&
                             std::binary_search(st.leaves.begin(), st.leaves.end(), x);
                if (inside) moves.push_back(std::move(p));
            }
            for (const SubdivisionPatch& p : moves) {
                MeshState succ;
                succ.leaves.reserve(st.leaves.size() + 2 * p.size());
                for (CellId c : st.leaves)
                    if (!p.contains(c)) succ.leaves.push_back(c);
                for (CellId c : p.cells) {
                    const auto [first, count] = backend.expand(c);
                    for (std::uint32_t i = 0; i < count; ++i) succ.leaves.push_back(first + i);
                }
                std::sort(succ.leaves.begin(), succ.leaves.end());
                if (visited.insert(detail::digest_of(succ.leaves)).second) {
                    ++result.total_states;
                    if (result.total_states > state_cap) {
                        result.capped = true;
                        result.states.push_back(std::move(next));
                        return result;
                    }
                    next.push_back(std::move(succ));
                }
            }
        }
        result.states.push_back(std::move(next));
    }
    return result;
}

/// Best global errors sigma_n = min { Err(T) : |T| <= n } with an argmin
/// state per n.
struct BestErrorTable {
    std::vector<double> sigma;      // index n
    std::vector<MeshState> argmin;  // an attaining state (smallest complexity wins ties)
    bool capped = false;

    std::size_t max_n() const { return sigma.empty() ? 0 : sigma.size() - 1; }
};

template <typename Backend, typename ErrFn>
BestErrorTable best_errors(Backend& backend, const RefinementTree& initial, ErrFn&& err_fn,
                           std::size_t n_max, std::size_t state_cap = 10'000'000) {
    EnumerationResult en = enumerate_conforming(backend, initial, n_max, state_cap);
    BestErrorTable table;
    table.capped = en.capped;
    double best = std::numeric_limits<double>::infinity();
    MeshState best_state;
    for (std::size_t n = 0; n < en.states.size(); ++n) {
        for (const MeshState& st : en.states[n]) {
            double e = 0.0;
            for (CellId c : st.leaves) e += err_fn(c);
            if (e < best) {
                best = e;
                best_state = st;
            }
        }
        table.sigma.push_back(best);
        table.argmin.push_back(best_state);
    }
    return table;
}

/// One row of the near-best certification: the sharpest admissible bound over
/// n <= N and whether the run honors it.
struct CertifyRow {
    std::size_t N = 0;
    std::size_t best_n = 0;
    double bound = 0.0;  // min_n factor(N, n) * sigma_n
    double err = 0.0;    // Err(T_N)
    double ratio = 0.0;  // err / bound
    bool pass = false;
};

struct CertifyReport {
    std::vector<CertifyRow> rows;
    bool all_pass = true;
    double worst_ratio = 0.0;
};

/// Checks Err(T_N) <= (N + 1 + (P-1) n) / (N - n + 1) * sigma_n for every
/// covered N and n <= N, with a relative slack for floating-point noise.
inline CertifyReport certify_near_best(const std::vector<double>& err_at_n,
                                       const BestErrorTable& table, std::uint32_t max_patch_size,
                                       double rel_slack = 1e-8) {
    CertifyReport report;
    const std::size_t n_cov = table.sigma.size();
    for (std::size_t N = 0; N < err_at_n.size() && N < n_cov; ++N) {
        CertifyRow row;
        row.N = N;
        row.err = err_at_n[N];
        double bound = std::numeric_limits<double>::infinity();
        std::size_t best_n = 0;
        for (std::size_t n = 0; n <= N; ++n) {
            const double factor =
                (static_cast<double>(N) + 1.0 +
                 static_cast<double>(max_patch_size - 1) * static_cast<double>(n)) /
                (static_cast<double>(N) - static_cast<double>(n) + 1.0);
            const double b = factor * table.sigma[n];
            if (b < bound) {
                bound = b;
                best_n = n;
            }
        }
        row.bound = bound;
        row.best_n = best_n;
        row.ratio = std::isinf(bound) ? 0.0 : (bound == 0.0 ? (row.err == 0.0 ? 0.0 : 1e300)
                                                            : row.err / bound);
        row.pass = row.err <= bound * (1.0 + rel_slack);
        report.all_pass = report.all_pass && row.pass;
        report.worst_ratio = std::max(report.worst_ratio, row.ratio);
        report.rows.push_back(row);
    }
    return report;
}

/// Breadth-first search for the smallest conforming supertree: raw single
/// subdivisions only, so minimality in node count is by construction. This is
/// the independent check for the constructive completion.
template <typename Backend>
RefinementTree minimal_completion(Backend& backend, const RefinementTree& tree,
                                  std::size_t state_cap = 5'000'000) {
    if (backend.is_conforming(tree)) return tree;
    std::unordered_set<detail::Digest, detail::DigestHash> visited;
    std::vector<RefinementTree> frontier{tree};
    visited.insert(detail::digest_of(tree.leaves()));
    std::size_t total = 1;
    for (std::size_t depth = 0; depth < 1000; ++depth) {
        std::vector<RefinementTree> next;
        for (const RefinementTree& t : frontier) {
            for (CellId leaf : t.leaves()) {
                RefinementTree succ = t;
                succ.subdivide_cell_raw(backend, leaf);
                if (!visited.insert(detail::digest_of(succ.leaves())).second) continue;
                if (++total > state_cap)
                    throw std::runtime_error("minimal completion: state cap exceeded");
                if (backend.is_conforming(succ)) return succ;
                next.push_back(std::move(succ));
            }
        }
        if (next.empty()) break;
        frontier = std::move(next);
    }
    throw std::runtime_error("minimal completion: search exhausted without a conforming tree");
}

}  // namespace conftree::oracle
