#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "conftree/nvb2d.hpp"
#include "conftree/quadrature.hpp"
#include "conftree/targets.hpp"

namespace conftree {

/// Squared H1-seminorm distance from affine functions on a cell, together
/// with a (conservative) estimate of the quadrature error incurred.
struct LocalErrorResult {
    double value = 0.0;
    double estimated_quadrature_error = 0.0;
    bool tolerance_reached = true;
};

struct QuadratureSettings {
    bool adaptive = true;
    // Recursion caps, in bisection levels below the evaluated cell.
    int curve_depth = 24;  // loci that are curves (cost grows ~2^(d/2))
    int point_depth = 40;  // point loci (cost grows linearly in d)
    double tol = 1e-9;     // relative target used only for flagging
};

namespace detail {

struct TriPts {
    double x0, y0, x1, y1, x2, y2;
    double area;
};

enum class CellClass : std::uint8_t {
    free,          // no locus inside: one rule application suffices
    zero,          // gradient vanishes identically on the cell
    singular,      // locus intersects: recurse
};

inline double dist2_point_segment(double px, double py, double ax, double ay, double bx,
                                  double by) {
    const double vx = bx - ax, vy = by - ay;
    const double wx = px - ax, wy = py - ay;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return dx * dx + dy * dy;
}

inline bool point_in_closed_triangle(double px, double py, const TriPts& t) {
    auto side = [&](double ax, double ay, double bx, double by) {
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    };
    const double s0 = side(t.x0, t.y0, t.x1, t.y1);
    const double s1 = side(t.x1, t.y1, t.x2, t.y2);
    const double s2 = side(t.x2, t.y2, t.x0, t.y0);
    const bool has_neg = (s0 < 0) || (s1 < 0) || (s2 < 0);
    const bool has_pos = (s0 > 0) || (s1 > 0) || (s2 > 0);
    return !(has_neg && has_pos);
}

inline CellClass classify(const TargetFunction& u, const TriPts& t) {
    switch (u.locus.kind) {
        case SingularLocus::Kind::none:
            return CellClass::free;
        case SingularLocus::Kind::point:
            return point_in_closed_triangle(u.locus.x, u.locus.y, t) ? CellClass::singular
                                                                     : CellClass::free;
        case SingularLocus::Kind::circle: {
            const double r2 = u.locus.radius * u.locus.radius;
            auto d2 = [&](double x, double y) {
                const double dx = x - u.locus.x, dy = y - u.locus.y;
                return dx * dx + dy * dy;
            };
            const double d0 = d2(t.x0, t.y0), d1 = d2(t.x1, t.y1), d22 = d2(t.x2, t.y2);
            if (d0 <= r2 && d1 <= r2 && d22 <= r2) return CellClass::free;  // inside (convex)
            if (d0 >= r2 && d1 >= r2 && d22 >= r2) {
                // All vertices outside; fully outside iff the closest boundary
                // point is outside too (the disk is convex).
                const double m2 =
                    std::min({dist2_point_segment(u.locus.x, u.locus.y, t.x0, t.y0, t.x1, t.y1),
                              dist2_point_segment(u.locus.x, u.locus.y, t.x1, t.y1, t.x2, t.y2),
                              dist2_point_segment(u.locus.x, u.locus.y, t.x2, t.y2, t.x0, t.y0)});
                if (m2 >= r2) return u.locus.zero_outside ? CellClass::zero : CellClass::free;
            }
            return CellClass::singular;
        }
    }
    return CellClass::free;
}

/// Integral triple over one cell: A = integral of |grad u|^2, B = integral of
/// grad u. Everything downstream derives from these.
struct Integrals {
    double a = 0.0, bx = 0.0, by = 0.0;
    double est = 0.0;  // conservative quadrature-error estimate for `a`
    // How the value was obtained; drives consistency handling when cells are
    // subdivided past a capped evaluation.
    enum class How : std::uint8_t { unset, direct, recursed, capped, restituted } how = How::unset;
};

inline Integrals direct_rule(const TargetFunction& u, const TriPts& t,
                             const quad::TriangleRule& rule) {
    double a = 0.0, bx = 0.0, by = 0.0;
    for (const auto& nd : rule.nodes) {
        const double x = nd.b0 * t.x0 + nd.b1 * t.x1 + nd.b2 * t.x2;
        const double y = nd.b0 * t.y0 + nd.b1 * t.y1 + nd.b2 * t.y2;
        const auto g = u.gradient(x, y);
        a += nd.w * (g[0] * g[0] + g[1] * g[1]);
        bx += nd.w * g[0];
        by += nd.w * g[1];
    }
    Integrals r;
    r.a = a * t.area;
    r.bx = bx * t.area;
    r.by = by * t.area;
    r.est = 1e-15 * std::abs(r.a);
    r.how = Integrals::How::direct;
    return r;
}

inline double error_from(const Integrals& I, double area, std::atomic<long>* negative_warnings) {
    const double b2 = I.bx * I.bx + I.by * I.by;
    const double raw = I.a - b2 / area;
    // Cancellation floor: below ~1e-14 of the gradient mass the difference is
    // round-off, and exact zeros matter (affine targets must terminate).
    if (raw <= 1e-14 * I.a) {
        if (raw < -1e-12 * I.a && negative_warnings) negative_warnings->fetch_add(1);
        return 0.0;
    }
    return raw;
}

}  // namespace detail

/// Cell-indexed H1 local errors over an NVB backend, with the recursive
/// quadrature layer for singular targets.
///
/// Integral triples are memoized per cell and parents of recursed cells are
/// the floating-point sum of their children's triples. Local errors computed
/// from such triples are subadditive up to round-off (Cauchy-Schwarz on the
/// shared sums), which the greedy indicator theory needs; a plain independent
/// rule per cell would not give that. When the mesh subdivides a cell whose
/// value was depth-capped, the children are evaluated directly and shifted by
/// half the residual so that the sum stays exact.
class H1ErrorFunctional {
public:
    H1ErrorFunctional(nvb::NvbBackend& backend, TargetFunction target,
                      QuadratureSettings settings = {})
        : backend_(&backend),
          target_(std::move(target)),
          settings_(settings),
          rule_(&quad::shared_degree17_rule()) {}

    /// Local error of a cell (memoized).
    double operator()(CellId c) {
        ensure_size(c);
        if (!err_known_[c]) {
            const detail::Integrals& I = integrals(c);
            err_[c] = detail::error_from(I, cell_area(c), &negative_clamps_);
            err_known_[c] = 1;
        }
        return err_[c];
    }

    LocalErrorResult local_error(CellId c) {
        const double v = (*this)(c);
        const detail::Integrals& I = integrals(c);
        LocalErrorResult r;
        r.value = v;
        r.estimated_quadrature_error = I.est;
        r.tolerance_reached = I.est <= settings_.tol * std::max(v, 1e-14 * I.a);
        return r;
    }

    const detail::Integrals& integrals(CellId c) {
        ensure_size(c);
        detail::Integrals& slot = integrals_[c];
        if (slot.how != detail::Integrals::How::unset) return slot;

        // If the parent's value was capped or restituted, derive the children
        // as direct evaluations shifted to sum exactly to the parent.
        const CellId p = backend_->parent(c);
        if (p != kNoCell && !backend_->is_synthetic(p)) {
            ensure_size(p);
            const detail::Integrals& pi = integrals_[p];
            if (pi.how == detail::Integrals::How::capped ||
                pi.how == detail::Integrals::How::restituted) {
                restitute_children(p);
                return integrals_[c];
            }
        }

        const int depth = settings_.adaptive
                              ? (target_.locus.kind == SingularLocus::Kind::point
                                     ? settings_.point_depth
                                     : settings_.curve_depth)
                              : 0;
        compute(c, depth);
        return integrals_[c];
    }

    double cell_area(CellId c) const { return backend_->area(c); }

    long negative_clamp_count() const { return negative_clamps_.load(); }
    const TargetFunction& target() const { return target_; }
    const QuadratureSettings& settings() const { return settings_; }

private:
    detail::TriPts tri_pts(CellId c) const {
        const nvb::Triangle& t = backend_->triangle(c);
        const auto& vp = backend_->vertices();
        detail::TriPts r{vp.x(t.v[0]), vp.y(t.v[0]), vp.x(t.v[1]), vp.y(t.v[1]),
                         vp.x(t.v[2]), vp.y(t.v[2]), 0.0};
        r.area = backend_->area(c);
        return r;
    }

    void ensure_size(CellId c) {
        const std::size_t need = std::max<std::size_t>(backend_->arena().size(), c + 1);
        if (integrals_.size() < need) {
            integrals_.resize(need);
            err_.resize(need, 0.0);
            err_known_.resize(need, 0);
        }
    }

    void compute(CellId c, int depth) {
        ensure_size(c);
        detail::Integrals& slot = integrals_[c];
        if (slot.how != detail::Integrals::How::unset) return;
        const detail::TriPts t = tri_pts(c);
        const detail::CellClass cls = detail::classify(target_, t);
        if (cls == detail::CellClass::zero) {
            slot = detail::Integrals{0.0, 0.0, 0.0, 0.0, detail::Integrals::How::direct};
            return;
        }
        if (cls == detail::CellClass::free || !settings_.adaptive) {
            slot = detail::direct_rule(target_, t, *rule_);
            return;
        }
        if (depth <= 0) {
            slot = detail::direct_rule(target_, t, *rule_);
            slot.est = std::abs(slot.a);  // crude: the cell still carries the locus
            slot.how = detail::Integrals::How::capped;
            return;
        }
        const auto [first, count] = backend_->expand(c);
        detail::Integrals acc;
        acc.how = detail::Integrals::How::recursed;
        for (std::uint32_t i = 0; i < count; ++i) {
            compute(first + i, depth - 1);
            // `compute` may reallocate the vector; re-read the child slot.
            const detail::Integrals& ci = integrals_[first + i];
            acc.a += ci.a;
            acc.bx += ci.bx;
            acc.by += ci.by;
            acc.est += ci.est;
        }
        integrals_[c] = acc;
    }

    void restitute_children(CellId p) {
        const auto [first, count] = backend_->expand(p);
        ensure_size(first + count - 1);
        const detail::Integrals pi = integrals_[p];
        std::vector<detail::Integrals> direct(count);
        double sa = 0.0, sbx = 0.0, sby = 0.0;
        for (std::uint32_t i = 0; i < count; ++i) {
            direct[i] = detail::direct_rule(target_, tri_pts(first + i), *rule_);
            sa += direct[i].a;
            sbx += direct[i].bx;
            sby += direct[i].by;
        }
        const double da = (pi.a - sa) / count;
        const double dbx = (pi.bx - sbx) / count;
        const double dby = (pi.by - sby) / count;
        for (std::uint32_t i = 0; i < count; ++i) {
            detail::Integrals& ci = integrals_[first + i];
            if (ci.how != detail::Integrals::How::unset) continue;
            ci = direct[i];
            ci.a += da;
            ci.bx += dbx;
            ci.by += dby;
            ci.est = std::abs(ci.a);
            ci.how = detail::Integrals::How::restituted;
        }
    }

    nvb::NvbBackend* backend_;
    TargetFunction target_;
    QuadratureSettings settings_;
    const quad::TriangleRule* rule_;
    std::vector<detail::Integrals> integrals_;
    std::vector<double> err_;
    std::vector<std::uint8_t> err_known_;
    std::atomic<long> negative_clamps_{0};
};

/// Standalone local error on an explicit triangle (a0, a1, a2), a1 newest:
/// the same bisection recursion without arena or memoization. Intended for
/// direct checks against closed forms.
inline LocalErrorResult local_error_h1(const TargetFunction& u,
                                       const std::array<std::array<double, 2>, 3>& tri,
                                       const QuadratureSettings& settings = {}) {
    const auto& rule = quad::shared_degree17_rule();
    struct Rec {
        const TargetFunction& u;
        const quad::TriangleRule& rule;
        detail::Integrals run(const detail::TriPts& t, int depth) const {
            const detail::CellClass cls = detail::classify(u, t);
            if (cls == detail::CellClass::zero)
                return detail::Integrals{0, 0, 0, 0, detail::Integrals::How::direct};
            if (cls == detail::CellClass::free || depth <= 0) {
                auto r = detail::direct_rule(u, t, rule);
                if (cls == detail::CellClass::singular) {
                    r.est = std::abs(r.a);
                    r.how = detail::Integrals::How::capped;
                }
                return r;
            }
            // Newest-vertex bisection: children (a0, m, a1) and (a2, m, a1).
            const double mx = 0.5 * (t.x0 + t.x2), my = 0.5 * (t.y0 + t.y2);
            const detail::TriPts c1{t.x0, t.y0, mx, my, t.x1, t.y1, 0.5 * t.area};
            const detail::TriPts c2{t.x2, t.y2, mx, my, t.x1, t.y1, 0.5 * t.area};
            const auto i1 = run(c1, depth - 1);
            const auto i2 = run(c2, depth - 1);
            detail::Integrals acc;
            acc.a = i1.a + i2.a;
            acc.bx = i1.bx + i2.bx;
            acc.by = i1.by + i2.by;
            acc.est = i1.est + i2.est;
            acc.how = detail::Integrals::How::recursed;
            return acc;
        }
    } rec{u, rule};

    detail::TriPts t{tri[0][0], tri[0][1], tri[1][0], tri[1][1], tri[2][0], tri[2][1], 0.0};
    t.area = 0.5 * std::abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) -
                            (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0]));
    const int depth = settings.adaptive
                          ? (u.locus.kind == SingularLocus::Kind::point ? settings.point_depth
                                                                        : settings.curve_depth)
                          : 0;
    const auto I = rec.run(t, depth);
    LocalErrorResult res;
    res.value = detail::error_from(I, t.area, nullptr);
    res.estimated_quadrature_error = I.est;
    res.tolerance_reached = I.est <= settings.tol * std::max(res.value, 1e-14 * I.a);
    return res;
}

}  // namespace conftree
