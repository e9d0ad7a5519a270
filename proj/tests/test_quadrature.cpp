#include <catch2/catch_amalgamated.hpp>

#include <cstdint>

#include "conftree/quadrature.hpp"

using namespace conftree;

namespace {

// Independent reference: integral over the reference triangle of x^i y^j via
// exact 64-bit factorials, i!j!/(i+j+2)!.
double factorial_reference(int i, int j) {
    auto fact = [](int n) {
        std::uint64_t f = 1;
        for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
        return f;
    };
    return static_cast<double>(fact(i)) * static_cast<double>(fact(j)) /
           static_cast<double>(fact(i + j + 2));
}

}  // namespace

TEST_CASE("constant integrates to the area exactly") {
    const auto& rule = quad::shared_degree17_rule();
    double w = 0.0;
    for (const auto& nd : rule.nodes) w += nd.w;
    CHECK(w == 1.0);  // weights normalized bit-exactly
}

TEST_CASE("x^8 y^9 matches the factorial formula") {
    const auto& rule = quad::shared_degree17_rule();
    double acc = 0.0;
    for (const auto& nd : rule.nodes) {
        double v = 1.0;
        for (int k = 0; k < 8; ++k) v *= nd.b1;
        for (int k = 0; k < 9; ++k) v *= nd.b2;
        acc += nd.w * v;
    }
    acc *= 0.5;
    const double exact = factorial_reference(8, 9);
    CHECK(std::abs(acc - exact) <= 1e-13 * exact);
}

TEST_CASE("rule is exact for every monomial of total degree <= 17") {
    const auto& rule = quad::shared_degree17_rule();
    const auto rep = quad::validate_rule(rule);
    INFO("worst monomial: x^" << rep.worst_i << " y^" << rep.worst_j
                              << " rel err " << rep.max_rel_error);
    CHECK(rep.all_weights_positive);
    CHECK(rep.all_nodes_interior);
    CHECK(rep.max_rel_error <= 1e-13);
    CHECK(rep.pass);

    // Cross-check validate_rule's reference values against the factorial form.
    for (int d = 0; d <= 17; d += 5)
        for (int i = 0; i <= d; i += 3) {
            const double a = quad::reference_monomial_integral(i, d - i);
            const double b = factorial_reference(i, d - i);
            CHECK(std::abs(a - b) <= 1e-15 * b);
        }
}

TEST_CASE("degree-18 monomial fails (negative control)") {
    const auto& rule = quad::shared_degree17_rule();
    CHECK(quad::monomial_rule_error(rule, 18, 0) > 1e-10);
}
