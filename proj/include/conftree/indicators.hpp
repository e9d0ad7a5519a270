#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conftree/arena.hpp"
#include "conftree/tree.hpp"

namespace conftree {

/// Extended-real conventions used by the indicators: 1/0 = inf, r + inf = inf,
/// 1/inf = 0. IEEE double arithmetic realizes exactly these rules, so the
/// type is a plain double; the helpers below document the intent.
namespace xreal {
inline constexpr double infinity = std::numeric_limits<double>::infinity();
inline double recip(double x) { return 1.0 / x; }
}  // namespace xreal

/// mu = (1/err + penalty)^-1 under the extended-real conventions. A zero
/// penalty returns err itself (the initialization assignment), bit-exactly.
inline double marking_indicator(double err, double penalty) {
    if (penalty == 0.0) return err;
    return 1.0 / (1.0 / err + penalty);
}

/// Dynamic per-leaf state: local error, accumulated penalty and the marking
/// indicator derived from them.
struct LeafState {
    double err = 0.0;
    double penalty = 0.0;  // lambda for the penalized variant
    double mu = 0.0;
};

enum class Marking {
    penalized,  // conformity-aware: only the marked cell's requests are recorded
    simple,     // every subdivided cell records its own subdivision
};

struct StoppingRule {
    enum class Kind { indicator_zero, max_iterations, error_below } kind = Kind::indicator_zero;
    std::size_t iterations = 0;
    double tol = 0.0;

    static StoppingRule indicator_zero() { return {}; }
    static StoppingRule max_iterations(std::size_t n) {
        return {Kind::max_iterations, n, 0.0};
    }
    static StoppingRule error_below(double tol) { return {Kind::error_below, 0, tol}; }
};

enum class RunStatus { indicator_zero, iterations_reached, error_reached, cap_exceeded };

/// One executed iteration: the state of the tree before the subdivision plus
/// the action taken.
struct StepRecord {
    std::size_t n = 0;
    CellId marked = kNoCell;
    std::uint32_t patch_size = 0;
    double max_indicator = 0.0;  // t_n over the leaves of T_n
    double err_global = 0.0;     // Err(T_n)
    std::size_t leaves = 0;
    std::size_t complexity = 0;  // |T_n| (= n)
};

struct RunTrace {
    std::vector<StepRecord> steps;
    double final_err = 0.0;
    double final_max_indicator = 0.0;
    std::size_t final_leaves = 0;
    std::size_t final_complexity = 0;
    RunStatus status = RunStatus::indicator_zero;

    /// Err(T_N) for every recorded N (steps carry T_0..T_{K-1}, the final
    /// state is T_K).
    double err_at(std::size_t n) const {
        return n < steps.size() ? steps[n].err_global : final_err;
    }
    std::size_t recorded_states() const { return steps.size() + 1; }
};

struct NoopMonitor {
    template <typename Engine>
    void after_step(Engine&, const StepRecord&, const SubdivisionPatch&) {}
};

/// Greedy refinement driver over any geometry backend and local error
/// functional.
///
/// The penalized variant marks the leaf with maximal indicator, subdivides a
/// patch necessary for it, and adds the reciprocal local error to the marked
/// cell's penalty; children inherit the penalty of their parent. The simple
/// variant penalizes every subdivided cell instead. Ties in the argmax are
/// broken toward the smallest cell id, so runs are deterministic.
template <typename Backend, typename ErrFn>
class GreedyEngine {
public:
    GreedyEngine(Backend& backend, ErrFn err_fn, Marking marking)
        : backend_(&backend), err_fn_(std::move(err_fn)), marking_(marking),
          tree_(backend.initial_tree()) {
        for (CellId c : tree_.leaves()) {
            const double e = checked_err(c);
            set_state(c, e, 0.0, marking_indicator(e, 0.0));
            global_err_ += e;
        }
    }

    const RefinementTree& tree() const { return tree_; }
    const RunTrace& trace() const { return trace_; }
    std::size_t iteration() const { return n_; }
    double global_error() const { return global_err_; }
    Backend& backend() { return *backend_; }

    double max_indicator() const { return queue_.begin()->first; }
    CellId argmax_cell() const { return queue_.begin()->second; }
    double penalty_of(CellId c) const { return penalty_[c]; }
    double mu_of(CellId c) const { return mu_[c]; }
    double err_of(CellId c) const { return err_[c]; }

    /// Executes one iteration unconditionally (callers check stopping rules).
    /// Returns the record of the step.
    template <typename Monitor = NoopMonitor>
    StepRecord step(Monitor&& monitor = {}) {
        const auto [t_n, marked] = *queue_.begin();
        StepRecord rec;
        rec.n = n_;
        rec.marked = marked;
        rec.max_indicator = t_n;
        rec.err_global = global_err_;
        rec.leaves = tree_.leaf_count();
        rec.complexity = tree_.complexity();

        SubdivisionPatch patch = backend_->necessary_patch(tree_, marked);
        rec.patch_size = static_cast<std::uint32_t>(patch.size());
        tree_.subdivide_patch(*backend_, patch);

        // Record the request on the marked cell before children inherit, so
        // the marked cell's own children see the incremented penalty.
        if (marking_ == Marking::penalized)
            penalty_[marked] = 1.0 / err_[marked] + penalty_[marked];

        bool removed_infinite = false;
        for (CellId parent : patch.cells) {
            queue_.erase({mu_[parent], parent});
            if (std::isinf(err_[parent]))
                removed_infinite = true;
            else
                global_err_ -= err_[parent];
            const auto first = backend_->arena().first_child(parent);
            const auto count = backend_->arena().child_count(parent);
            for (std::uint32_t i = 0; i < count; ++i) {
                const CellId child = first + i;
                const double e = checked_err(child);
                const double pen = (marking_ == Marking::simple)
                                       ? 1.0 / err_[parent] + penalty_[parent]
                                       : penalty_[parent];
                set_state(child, e, pen, marking_indicator(e, pen));
                global_err_ += e;
            }
        }
        if (marking_ == Marking::penalized && !patch.contains(marked)) {
            // The marked cell stays a leaf; refresh its indicator in place.
            queue_.erase({mu_[marked], marked});
            mu_[marked] = marking_indicator(err_[marked], penalty_[marked]);
            queue_.insert({mu_[marked], marked});
        }
        if (removed_infinite) recompute_global_error();

        ++n_;
        trace_.steps.push_back(rec);
        monitor.after_step(*this, rec, patch);
        return rec;
    }

    template <typename Monitor = NoopMonitor>
    RunStatus run(const StoppingRule& stop, std::size_t iteration_cap = 50'000'000,
                  Monitor&& monitor = {}) {
        RunStatus status = RunStatus::cap_exceeded;
        while (true) {
            if (stop.kind == StoppingRule::Kind::indicator_zero && !(max_indicator() > 0.0)) {
                status = RunStatus::indicator_zero;
                break;
            }
            if (stop.kind == StoppingRule::Kind::max_iterations && n_ >= stop.iterations) {
                status = RunStatus::iterations_reached;
                break;
            }
            if (stop.kind == StoppingRule::Kind::error_below && global_err_ <= stop.tol) {
                status = RunStatus::error_reached;
                break;
            }
            if (!(max_indicator() > 0.0)) {
                // Nothing subdividable can reduce the error further.
                status = RunStatus::indicator_zero;
                break;
            }
            if (n_ >= iteration_cap) {
                status = RunStatus::cap_exceeded;
                break;
            }
            step(monitor);
        }
        trace_.final_err = global_err_;
        trace_.final_max_indicator = max_indicator();
        trace_.final_leaves = tree_.leaf_count();
        trace_.final_complexity = tree_.complexity();
        trace_.status = status;
        return status;
    }

private:
    double checked_err(CellId c) {
        const double e = err_fn_(c);
        if (std::isnan(e) || e < 0.0)
            throw std::invalid_argument("local error must be a nonnegative number");
        return e;
    }

    void set_state(CellId c, double err, double penalty, double mu) {
        if (err_.size() <= c) {
            const std::size_t need = std::max<std::size_t>(backend_->arena().size(), c + 1);
            err_.resize(need, 0.0);
            penalty_.resize(need, 0.0);
            mu_.resize(need, 0.0);
        }
        err_[c] = err;
        penalty_[c] = penalty;
        mu_[c] = mu;
        queue_.insert({mu, c});
    }

    void recompute_global_error() {
        global_err_ = 0.0;
        for (CellId c : tree_.leaves()) global_err_ += err_[c];
    }

    struct QueueOrder {
        bool operator()(const std::pair<double, CellId>& a,
                        const std::pair<double, CellId>& b) const {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        }
    };

    Backend* backend_;
    ErrFn err_fn_;
    Marking marking_;
    RefinementTree tree_;
    std::vector<double> err_, penalty_, mu_;
    std::set<std::pair<double, CellId>, QueueOrder> queue_;
    double global_err_ = 0.0;
    std::size_t n_ = 0;
    RunTrace trace_;
};

/// Sum of the local errors over the leaves.
template <typename ErrFn>
double global_error(const RefinementTree& tree, ErrFn&& err_fn) {
    double s = 0.0;
    for (CellId c : tree.leaves()) s += err_fn(c);
    return s;
}

template <typename Backend, typename ErrFn>
GreedyEngine<Backend, ErrFn> make_engine(Backend& backend, ErrFn err_fn, Marking marking) {
    return GreedyEngine<Backend, ErrFn>(backend, std::move(err_fn), marking);
}

}  // namespace conftree
