#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "conftree/arena.hpp"
#include "conftree/tree.hpp"

namespace conftree::bisect1d {

/// Interval bisection of [0, 1] with singleton subdivision patches: the
/// unrestricted setting, where any full binary subtree is admissible. Used as
/// the reduction reference (both greedy variants must coincide here) and in
/// generic tree tests.
class Backend {
public:
    Backend() {
        root_ = arena_.add_root();
        lo_ = {0.0};
        hi_ = {1.0};
    }

    static constexpr std::uint32_t max_patch_size = 1;

    CellId root() const { return root_; }
    RefinementTree initial_tree() const { return RefinementTree::single_cell(root_); }

    std::pair<CellId, std::uint32_t> expand(CellId c) {
        if (arena_.expanded(c)) return {arena_.first_child(c), 2};
        const CellId first = arena_.create_children(c, 2);
        const double mid = 0.5 * (lo_[c] + hi_[c]);
        lo_.resize(arena_.size());
        hi_.resize(arena_.size());
        lo_[first] = lo_[c];
        hi_[first] = mid;
        lo_[first + 1] = mid;
        hi_[first + 1] = hi_[c];
        return {first, 2};
    }

    SubdivisionPatch subdivision_patch(CellId c) const { return SubdivisionPatch{c}; }

    SubdivisionPatch necessary_patch(const RefinementTree&, CellId c) const {
        return SubdivisionPatch{c};
    }

    bool is_conforming(const RefinementTree&) const { return true; }

    double lo(CellId c) const { return lo_[c]; }
    double hi(CellId c) const { return hi_[c]; }
    std::uint32_t generation(CellId c) const { return arena_.generation(c); }
    const CellArena& arena() const { return arena_; }

private:
    CellArena arena_;
    CellId root_ = kNoCell;
    std::vector<double> lo_, hi_;
};

/// Squared L2 distance of u(x) = x^2 from constants on [a, b], in closed form.
inline double xsq_best_constant_error(double a, double b) {
    const double len = b - a;
    const double mean = (a * a + a * b + b * b) / 3.0;
    const double x5 = (std::pow(b, 5) - std::pow(a, 5)) / 5.0;
    return x5 - mean * mean * len;
}

}  // namespace conftree::bisect1d
