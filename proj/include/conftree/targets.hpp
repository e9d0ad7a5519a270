#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace conftree {

/// Geometric descriptor of where a target's gradient is singular or kinked,
/// used by the local-error quadrature to decide which cells need recursive
/// refinement.
struct SingularLocus {
    enum class Kind { none, point, circle } kind = Kind::none;
    double x = 0.0, y = 0.0;
    double radius = 0.0;
    // Circle loci only: the gradient vanishes identically outside the circle,
    // so integrals over fully-outside cells are exactly zero.
    bool zero_outside = false;
};

struct TargetFunction {
    std::string name;
    std::function<double(double, double)> value;
    std::function<std::array<double, 2>(double, double)> gradient;
    SingularLocus locus;
};

/// r^(2/3) sin(2 theta / 3) on the L-shaped domain, theta in [0, 3pi/2]
/// measured counterclockwise from the positive x-axis so the function
/// vanishes on both legs of the reentrant corner. Gradient magnitude is
/// (2/3) r^(-1/3); the origin is the singular point.
inline TargetFunction target_u1() {
    TargetFunction t;
    t.name = "u1";
    t.locus = SingularLocus{SingularLocus::Kind::point, 0.0, 0.0, 0.0, false};
    auto polar = [](double x, double y) {
        double th = std::atan2(y, x);
        if (th < 0.0) th += 2.0 * M_PI;
        return std::pair<double, double>(std::hypot(x, y), th);
    };
    t.value = [polar](double x, double y) {
        const auto [r, th] = polar(x, y);
        return std::cbrt(r * r) * std::sin(2.0 * th / 3.0);
    };
    t.gradient = [polar](double x, double y) -> std::array<double, 2> {
        const auto [r, th] = polar(x, y);
        if (r == 0.0) return {0.0, 0.0};
        const double s = (2.0 / 3.0) / std::cbrt(r);
        const double a = 2.0 * th / 3.0;
        const double ur = s * std::sin(a);   // radial derivative
        const double ut = s * std::cos(a);   // (1/r) d/dtheta
        const double c = std::cos(th), sn = std::sin(th);
        return {ur * c - ut * sn, ur * sn + ut * c};
    };
    return t;
}

/// max{0, 1/9 - |x|^2} on the square: quadratic inside the circle of radius
/// 1/3, zero outside; the gradient kinks across the circle.
inline TargetFunction target_u2() {
    TargetFunction t;
    t.name = "u2";
    t.locus = SingularLocus{SingularLocus::Kind::circle, 0.0, 0.0, 1.0 / 3.0, true};
    t.value = [](double x, double y) {
        const double v = 1.0 / 9.0 - (x * x + y * y);
        return v > 0.0 ? v : 0.0;
    };
    t.gradient = [](double x, double y) -> std::array<double, 2> {
        if (x * x + y * y < 1.0 / 9.0) return {-2.0 * x, -2.0 * y};
        return {0.0, 0.0};
    };
    return t;
}

/// Fixed affine target: in the span of P1, so every local error vanishes.
inline TargetFunction target_affine() {
    TargetFunction t;
    t.name = "affine";
    t.value = [](double x, double y) { return 0.25 + 0.5 * x - 0.75 * y; };
    t.gradient = [](double, double) -> std::array<double, 2> { return {0.5, -0.75}; };
    return t;
}

/// u(x, y) = x^2; smooth everywhere, used for closed-form quadrature checks.
inline TargetFunction target_xsq() {
    TargetFunction t;
    t.name = "xsq";
    t.value = [](double x, double) { return x * x; };
    t.gradient = [](double x, double) -> std::array<double, 2> { return {2.0 * x, 0.0}; };
    return t;
}

inline TargetFunction make_target(const std::string& name) {
    if (name == "u1") return target_u1();
    if (name == "u2") return target_u2();
    if (name == "affine") return target_affine();
    if (name == "xsq") return target_xsq();
    throw std::invalid_argument("unknown target: " + name);
}

}  // namespace conftree
