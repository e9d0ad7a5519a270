#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace conftree::quad {

/// Quadrature rule on the reference triangle (0,0)-(1,0)-(0,1), stored in
/// barycentric coordinates. Weights are normalized to sum to exactly 1, so
///   integral over T of f  ~=  area(T) * sum_i w_i f(p_i).
struct TriangleRule {
    struct Node {
        double b0, b1, b2;  // barycentric, strictly positive
        double w;
    };
    std::vector<Node> nodes;
    int degree = 0;  // polynomial exactness
};

namespace detail {

/// Gauss-Legendre nodes/weights on [0, 1] via Newton iteration on P_n.
inline void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev initial guess on [-1, 1].
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double wt = 2.0 / ((1.0 - z * z) * pp * pp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wt;
        w[n - 1 - i] = 0.5 * wt;
    }
}

}  // namespace detail

/// Conical-product rule exact for bivariate polynomials of total degree <= 17:
/// x = s(1-t), y = t with Gauss-Legendre in s (9 pts, degree 17) and in t
/// (10 pts; the extra Jacobian factor (1-t) raises the needed t-degree to 18).
/// All nodes are strictly interior and all weights positive.
inline TriangleRule degree17_rule() {
    TriangleRule rule;
    rule.degree = 17;
    std::vector<double> xs, ws, xt, wt;
    detail::gauss_legendre01(9, xs, ws);
    detail::gauss_legendre01(10, xt, wt);
    rule.nodes.reserve(xs.size() * xt.size());
    double wsum = 0.0;
    for (std::size_t j = 0; j < xt.size(); ++j) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x = xs[i] * (1.0 - xt[j]);
            const double y = xt[j];
            const double w = ws[i] * wt[j] * (1.0 - xt[j]);
            rule.nodes.push_back({1.0 - x - y, x, y, w});
            wsum += w;
        }
    }
    // Normalize so the weights sum to exactly 1 (constants integrate exactly).
    for (auto& nd : rule.nodes) nd.w /= wsum;
    double s = 0.0;
    for (const auto& nd : rule.nodes) s += nd.w;
    rule.nodes.back().w += 1.0 - s;
    return rule;
}

inline const TriangleRule& shared_degree17_rule() {
    static const TriangleRule rule = degree17_rule();
    return rule;
}

/// integral over the reference triangle of x^i y^j = i! j! / (i + j + 2)!.
inline double reference_monomial_integral(int i, int j) {
    // (i + j + 2)! fits in int64 up to degree 18; compute the ratio stably by
    // dividing factors out incrementally.
    long double v = 1.0L;
    // v = i! j! / (i+j+2)! = 1 / [ C(i+j, i) * (i+j+1) * (i+j+2) ]
    long double binom = 1.0L;
    for (int k = 1; k <= i; ++k) binom *= static_cast<long double>(i + j - i + k) / k;
    v = 1.0L / (binom * (i + j + 1) * (i + j + 2));
    return static_cast<double>(v);
}

struct RuleValidation {
    int degree_checked = 0;
    double max_rel_error = 0.0;
    int worst_i = 0, worst_j = 0;
    bool all_weights_positive = true;
    bool all_nodes_interior = true;
    bool pass = false;
};

/// Checks exactness on every monomial of total degree <= degree_checked,
/// plus positivity and interiority. Passes iff the max relative error is
/// <= 1e-13 and the structural checks hold.
inline RuleValidation validate_rule(const TriangleRule& rule, int max_degree = 17,
                                    double tol = 1e-13) {
    RuleValidation rep;
    rep.degree_checked = max_degree;
    for (const auto& nd : rule.nodes) {
        if (nd.w <= 0.0) rep.all_weights_positive = false;
        if (nd.b0 <= 0.0 || nd.b1 <= 0.0 || nd.b2 <= 0.0) rep.all_nodes_interior = false;
    }
    const double area = 0.5;
    for (int d = 0; d <= max_degree; ++d) {
        for (int i = 0; i <= d; ++i) {
            const int j = d - i;
            double acc = 0.0;
            for (const auto& nd : rule.nodes)
                acc += nd.w * std::pow(nd.b1, i) * std::pow(nd.b2, j);
            acc *= area;
            const double exact = reference_monomial_integral(i, j);
            const double rel = std::abs(acc - exact) / exact;
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_i = i;
                rep.worst_j = j;
            }
        }
    }
    rep.pass = rep.max_rel_error <= tol && rep.all_weights_positive && rep.all_nodes_interior;
    return rep;
}

/// Relative quadrature error of the rule on a single monomial; used as the
/// negative control for degrees beyond the rule's exactness.
inline double monomial_rule_error(const TriangleRule& rule, int i, int j) {
    double acc = 0.0;
    for (const auto& nd : rule.nodes) acc += nd.w * std::pow(nd.b1, i) * std::pow(nd.b2, j);
    acc *= 0.5;
    const double exact = reference_monomial_integral(i, j);
    return std::abs(acc - exact) / exact;
}

}  // namespace conftree::quad
