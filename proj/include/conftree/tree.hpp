#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "conftree/arena.hpp"

namespace conftree {

/// Minimal cell set whose simultaneous subdivision keeps the mesh conforming.
/// Cells are kept sorted by id.
struct SubdivisionPatch {
    std::vector<CellId> cells;

    SubdivisionPatch() = default;
    explicit SubdivisionPatch(CellId c) : cells{c} {}
    SubdivisionPatch(CellId a, CellId b) {
        cells = a < b ? std::vector<CellId>{a, b} : std::vector<CellId>{b, a};
    }

    std::size_t size() const { return cells.size(); }
    bool contains(CellId c) const {
        return std::binary_search(cells.begin(), cells.end(), c);
    }
    bool operator==(const SubdivisionPatch&) const = default;
};

/// A full subtree of the master tree, tracked through its leaf front.
///
/// Trees only grow (never un-refine). `complexity()` counts the patches that
/// were subdivided to build the tree; `subdivide_cell_raw` bypasses the patch
/// bookkeeping and is meant for constructing nonconforming inputs in tests
/// and completion searches.
class RefinementTree {
public:
    RefinementTree() = default;

    static RefinementTree single_cell(CellId root) {
        RefinementTree t;
        t.root_ = root;
        t.leaves_ = {root};
        t.node_count_ = 1;
        return t;
    }

    /// Tree whose leaves are `cells` (all children of `root`), with empty
    /// patch history. This is the run entry point for multi-cell initial
    /// meshes: the root subdivision is structural, not a counted iteration.
    static RefinementTree forest(CellId root, std::vector<CellId> cells) {
        RefinementTree t;
        t.root_ = root;
        t.leaves_ = std::move(cells);
        std::sort(t.leaves_.begin(), t.leaves_.end());
        t.node_count_ = 1 + t.leaves_.size();
        return t;
    }

    CellId root() const { return root_; }
    const std::vector<CellId>& leaves() const { return leaves_; }
    std::size_t leaf_count() const { return leaves_.size(); }
    std::size_t node_count() const { return node_count_; }
    std::size_t complexity() const { return history_.size(); }
    const std::vector<SubdivisionPatch>& patch_history() const { return history_; }

    bool is_leaf(CellId c) const {
        return std::binary_search(leaves_.begin(), leaves_.end(), c);
    }

    /// Subdivides every cell of `patch` (which must be contained in the
    /// current leaves), appends the patch to the history and bumps the
    /// complexity by one.
    template <typename Backend>
    void subdivide_patch(Backend& backend, const SubdivisionPatch& patch) {
        for (CellId c : patch.cells)
            if (!is_leaf(c))
                throw std::invalid_argument("subdivision patch not contained in the leaves");
        for (CellId c : patch.cells) replace_leaf_by_children(backend, c);
        history_.push_back(patch);
    }

    /// Single-cell subdivision without patch bookkeeping (may produce a
    /// nonconforming tree).
    template <typename Backend>
    void subdivide_cell_raw(Backend& backend, CellId c) {
        if (!is_leaf(c)) throw std::invalid_argument("cell to subdivide is not a leaf");
        replace_leaf_by_children(backend, c);
    }

    bool operator==(const RefinementTree& o) const {
        return root_ == o.root_ && leaves_ == o.leaves_;
    }

private:
    template <typename Backend>
    void replace_leaf_by_children(Backend& backend, CellId c) {
        const auto [first, count] = backend.expand(c);
        const auto pos = std::lower_bound(leaves_.begin(), leaves_.end(), c);
        leaves_.erase(pos);
        // Children have larger ids than any existing cell at creation time,
        // but the block may already exist (idempotent expansion), so insert
        // at the proper position.
        std::vector<CellId> kids(count);
        for (std::uint32_t i = 0; i < count; ++i) kids[i] = first + i;
        leaves_.insert(std::lower_bound(leaves_.begin(), leaves_.end(), kids.front()),
                       kids.begin(), kids.end());
        node_count_ += count;
    }

    CellId root_ = kNoCell;
    std::vector<CellId> leaves_;
    std::vector<SubdivisionPatch> history_;
    std::size_t node_count_ = 0;
};

}  // namespace conftree
