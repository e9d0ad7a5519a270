#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>

namespace conftree {

/// Exact dyadic rational `num / 2^exp`, canonical (num odd or exp == 0).
///
/// All mesh vertex coordinates are dyadic: midpoints of dyadic points are
/// dyadic, so bisection geometry never leaves this set and every predicate
/// below is exact. Exponents are capped well below 64 so that scaling to a
/// common denominator cannot overflow.
struct Dyadic {
    std::int64_t num = 0;
    std::uint32_t exp = 0;

    constexpr Dyadic() = default;

    static constexpr Dyadic from_int(std::int64_t n) { return Dyadic{n, 0}; }

    /// Builds `n / 2^e` and normalizes.
    static constexpr Dyadic make(std::int64_t n, std::uint32_t e) {
        while (e > 0 && (n & 1) == 0) {
            n >>= 1;
            --e;
        }
        return Dyadic{n, e};
    }

    double to_double() const {
        // Exact: |num| < 2^53 and exp < 1023 always hold here.
        return static_cast<double>(num) / static_cast<double>(std::int64_t{1} << exp);
    }

    constexpr bool operator==(const Dyadic&) const = default;

private:
    constexpr Dyadic(std::int64_t n, std::uint32_t e) : num(n), exp(e) {}
};

namespace detail {

// Exponent budget: values in our domains satisfy |x| <= 2, so a numerator
// scaled to exponent e is bounded by 2^(e+1). With e <= 60 every difference
// fits int64 and every product of two differences fits __int128.
inline constexpr std::uint32_t kMaxExp = 60;

inline void check_exp(std::uint32_t e) {
    if (e > kMaxExp) throw std::overflow_error("dyadic exponent budget exceeded");
}

inline std::int64_t scaled_num(const Dyadic& a, std::uint32_t e) {
    return a.num << (e - a.exp);
}

}  // namespace detail

inline std::uint32_t common_exp(const Dyadic& a, const Dyadic& b) {
    std::uint32_t e = a.exp > b.exp ? a.exp : b.exp;
    detail::check_exp(e);
    return e;
}

inline int compare(const Dyadic& a, const Dyadic& b) {
    const std::uint32_t e = common_exp(a, b);
    const std::int64_t na = detail::scaled_num(a, e);
    const std::int64_t nb = detail::scaled_num(b, e);
    return na < nb ? -1 : (na > nb ? 1 : 0);
}

inline bool operator<(const Dyadic& a, const Dyadic& b) { return compare(a, b) < 0; }

inline Dyadic midpoint(const Dyadic& a, const Dyadic& b) {
    const std::uint32_t e = common_exp(a, b) + 1;
    detail::check_exp(e);
    return Dyadic::make(detail::scaled_num(a, e - 1) + detail::scaled_num(b, e - 1), e);
}

inline Dyadic sub(const Dyadic& a, const Dyadic& b) {
    const std::uint32_t e = common_exp(a, b);
    return Dyadic::make(detail::scaled_num(a, e) - detail::scaled_num(b, e), e);
}

struct DyadicPoint {
    Dyadic x, y;

    constexpr bool operator==(const DyadicPoint&) const = default;

    double xd() const { return x.to_double(); }
    double yd() const { return y.to_double(); }
};

inline DyadicPoint midpoint(const DyadicPoint& a, const DyadicPoint& b) {
    return DyadicPoint{midpoint(a.x, b.x), midpoint(a.y, b.y)};
}

namespace detail {

// (dx, dy) of q - p scaled to a shared exponent; exact.
struct ScaledDiff {
    std::int64_t dx, dy;
    std::uint32_t exp;
};

inline ScaledDiff diff(const DyadicPoint& p, const DyadicPoint& q, std::uint32_t e) {
    return ScaledDiff{scaled_num(q.x, e) - scaled_num(p.x, e),
                      scaled_num(q.y, e) - scaled_num(p.y, e), e};
}

inline std::uint32_t common_exp4(const DyadicPoint& a, const DyadicPoint& b,
                                 const DyadicPoint& c) {
    std::uint32_t e = a.x.exp;
    for (std::uint32_t k : {a.y.exp, b.x.exp, b.y.exp, c.x.exp, c.y.exp})
        if (k > e) e = k;
    check_exp(e);
    return e;
}

}  // namespace detail

/// Sign of the cross product (q-p) x (r-p): +1 left turn, -1 right, 0 collinear.
inline int orient(const DyadicPoint& p, const DyadicPoint& q, const DyadicPoint& r) {
    const std::uint32_t e = detail::common_exp4(p, q, r);
    const auto u = detail::diff(p, q, e);
    const auto v = detail::diff(p, r, e);
    const __int128 cross = static_cast<__int128>(u.dx) * v.dy - static_cast<__int128>(u.dy) * v.dx;
    return cross > 0 ? 1 : (cross < 0 ? -1 : 0);
}

/// Twice the signed area, exact, as a double (numerators stay well under 2^53
/// after the dyadic scaling in our domains).
inline double signed_area2(const DyadicPoint& p, const DyadicPoint& q, const DyadicPoint& r) {
    const std::uint32_t e = detail::common_exp4(p, q, r);
    const auto u = detail::diff(p, q, e);
    const auto v = detail::diff(p, r, e);
    const __int128 cross = static_cast<__int128>(u.dx) * v.dy - static_cast<__int128>(u.dy) * v.dx;
    const double scale = static_cast<double>(std::int64_t{1} << e);
    return static_cast<double>(cross) / (scale * scale);
}

/// p on the closed segment [a, b].
inline bool on_segment(const DyadicPoint& p, const DyadicPoint& a, const DyadicPoint& b) {
    if (orient(a, b, p) != 0) return false;
    const std::uint32_t e = detail::common_exp4(p, a, b);
    const auto ap = detail::diff(a, p, e);
    const auto ab = detail::diff(a, b, e);
    const __int128 dot = static_cast<__int128>(ap.dx) * ab.dx + static_cast<__int128>(ap.dy) * ab.dy;
    const __int128 len2 = static_cast<__int128>(ab.dx) * ab.dx + static_cast<__int128>(ab.dy) * ab.dy;
    return dot >= 0 && dot <= len2;
}

/// Closed segment [c, d] contained in closed segment [a, b].
inline bool segment_contains(const DyadicPoint& a, const DyadicPoint& b,
                             const DyadicPoint& c, const DyadicPoint& d) {
    return on_segment(c, a, b) && on_segment(d, a, b);
}

struct DyadicPointHash {
    std::size_t operator()(const DyadicPoint& p) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        auto mix = [&h](std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        };
        mix(static_cast<std::uint64_t>(p.x.num));
        mix(p.x.exp);
        mix(static_cast<std::uint64_t>(p.y.num));
        mix(p.y.exp);
        return static_cast<std::size_t>(h);
    }
};

}  // namespace conftree
