#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace conftree {

/// Dense handle into the cell arena. Ids are assigned in creation order and
/// never reused, so a run's id sequence is reproducible.
using CellId = std::uint32_t;

inline constexpr CellId kNoCell = 0xffffffffu;

struct CellRecord {
    CellId parent = kNoCell;
    CellId first_child = kNoCell;  // children occupy [first_child, first_child + child_count)
    std::uint32_t child_count = 0;
    std::uint32_t generation = 0;
};

/// Lazily grown storage for the master tree. Only cells that some query or
/// subdivision has touched are materialized; the conceptual tree is infinite.
class CellArena {
public:
    CellId add_root() {
        if (!cells_.empty()) throw std::logic_error("arena already has a root");
        cells_.push_back(CellRecord{});
        return 0;
    }

    /// Creates `count` children of `parent` with contiguous ids. Idempotent:
    /// a second call returns the existing block.
    CellId create_children(CellId parent, std::uint32_t count) {
        CellRecord& rec = cells_.at(parent);
        if (rec.child_count != 0) {
            if (rec.child_count != count)
                throw std::logic_error("inconsistent re-expansion of a cell");
            return rec.first_child;
        }
        const CellId first = static_cast<CellId>(cells_.size());
        const std::uint32_t gen = rec.generation + 1;
        rec.first_child = first;
        rec.child_count = count;
        cells_.resize(cells_.size() + count);
        for (std::uint32_t i = 0; i < count; ++i) {
            CellRecord& c = cells_[first + i];
            c.parent = parent;
            c.generation = gen;
        }
        return first;
    }

    bool expanded(CellId c) const { return cells_[c].child_count != 0; }
    CellId parent(CellId c) const { return cells_[c].parent; }
    std::uint32_t generation(CellId c) const { return cells_[c].generation; }
    CellId first_child(CellId c) const { return cells_[c].first_child; }
    std::uint32_t child_count(CellId c) const { return cells_[c].child_count; }
    const CellRecord& record(CellId c) const { return cells_[c]; }
    std::size_t size() const { return cells_.size(); }

private:
    std::vector<CellRecord> cells_;
};

}  // namespace conftree
