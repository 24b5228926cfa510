#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "densemodel/rng.hpp"
#include "densemodel/steppoly.hpp"
#include "densemodel/testkit.hpp"

using namespace densemodel;

namespace {

/// Hand-assembled polynomial for negative verification tests; only the
/// evaluation fields are needed.
StepPolynomial raw_poly(std::vector<double> cheb, double t, double alpha, double beta) {
    StepPolynomial p;
    p.cheb = std::move(cheb);
    p.degree = static_cast<int>(p.cheb.size()) - 1;
    p.t = t;
    p.alpha = alpha;
    p.beta = beta;
    return p;
}

}  // namespace

TEST_CASE("built polynomials satisfy the three range conditions") {
    auto p = build_step_polynomial(0.5, 1.0 / 3.0, 1.0 / 12.0);
    CHECK(p.evaluate(1.0) >= 1.0 - p.beta - kTol);
    CHECK(p.evaluate(-1.0) <= p.beta + kTol);

    auto rep = verify_step_polynomial(p, 100000);
    CHECK(rep.pass);
    CHECK(rep.monotone);
    CHECK(rep.guaranteed);
    CHECK(rep.worst_monotone_decrease <= 1e-12);
    CHECK(p.degree <= 400);  // well below "a few hundred"
}

TEST_CASE("degenerate verification inputs fail the right conditions") {
    SECTION("constant 1/2 cannot reach 1-beta") {
        auto p = raw_poly({0.5}, 0.0, 0.5, 0.1);
        CHECK_THROWS_AS(verify_step_polynomial(p, 100), InvalidParameter);  // grid too small
        auto rep = verify_step_polynomial(p, 2000);
        CHECK_FALSE(rep.pass);
        CHECK(rep.worst_upper_condition > 0.0);   // condition 3 broken
        CHECK(rep.worst_lower_condition > 0.0);   // and condition 2 (0.5 > 0.1)
    }
    SECTION("identity p(z) = z leaks on both sides and leaves [0,1]") {
        auto p = raw_poly({0.0, 1.0}, 0.0, 0.5, 0.1);
        auto rep = verify_step_polynomial(p, 2000);
        CHECK_FALSE(rep.pass);
        CHECK(rep.worst_range_low > 0.0);
        CHECK(rep.worst_lower_condition > 0.0);
        CHECK(rep.worst_upper_condition > 0.0);
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_step_polynomial(0.5, 0.0, 0.1), InvalidParameter);
    CHECK_THROWS_AS(build_step_polynomial(0.5, 1.1, 0.1), InvalidParameter);
    CHECK_THROWS_AS(build_step_polynomial(0.5, 0.3, 0.0), InvalidParameter);
    CHECK_THROWS_AS(build_step_polynomial(1.2, 0.3, 0.1), InvalidParameter);
    CHECK_THROWS_AS(build_step_polynomial(-0.9, 0.3, 0.1), InvalidParameter);  // t - alpha < -1
}

TEST_CASE("degree cap is honored") {
    StepPolyOptions opts;
    opts.degree_cap = 8;
    CHECK_THROWS_AS(build_step_polynomial(0.0, 0.02, 0.005, opts), DegreeCapExceeded);
}

TEST_CASE("coefficient bound stays within the claim's exponential envelope") {
    for (double t : {-0.5, 0.2, 0.9}) {
        auto p = build_step_polynomial(t, 0.2, 0.05);
        // |c_i| <= 8^degree, in log10 to dodge overflow
        CHECK(p.log10_coeff_bound <= static_cast<double>(p.degree) * std::log10(8.0));
        CHECK(p.coeffs.size() == static_cast<std::size_t>(p.degree + 1));
        CHECK(p.coeffs_exact.size() == p.coeffs.size());
    }
}

TEST_CASE("monomial expansion agrees with the Chebyshev evaluation") {
    auto p = build_step_polynomial(0.3, 1.0 / 3.0, 1.0 / 12.0);
    using HP = boost::multiprecision::cpp_bin_float_100;
    // high-precision Horner over the exact monomial coefficients is an
    // independent evaluation route; agreement certifies the expansion
    for (std::uint64_t i = 0; i < 1000; ++i) {
        double z = rng::uniform_pm1(12345, i);
        HP acc = 0;
        for (std::size_t k = p.coeffs_exact.size(); k-- > 0;) {
            acc = acc * HP(z) + HP(p.coeffs_exact[k]);
        }
        double via_monomial = acc.convert_to<double>();
        CHECK(std::fabs(via_monomial - p.evaluate(z)) <= 1e-6);
    }
}

TEST_CASE("degree scaling when the transition halves") {
    auto base = build_step_polynomial(0.4, 1.0 / 3.0, 1.0 / 12.0);
    auto tight = build_step_polynomial(0.4, 1.0 / 6.0, 1.0 / 12.0);
    CHECK(tight.degree <= 8 * base.degree);
}

TEST_CASE("construction meets the acceptance envelope at eps = 0.1") {
    const double eps = 0.1;
    auto start = std::chrono::steady_clock::now();
    auto p = build_step_polynomial(0.0167, eps / 3.0, eps / 12.0);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
    CHECK(p.degree <= 4096);
    CHECK(ms < 5000.0);
    CHECK(verify_step_polynomial(p, 100000).pass);
}

TEST_CASE("compose_and_separate checks its preconditions") {
    Universe u(2);
    FunctionFamily family(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});
    auto fprime = signed_closure(family);
    Mixture fbar(fprime, {1.0, 0.0});
    Measure nu(u, {2.0, 0.0});

    auto p = build_step_polynomial(0.5, 0.2, 0.05);  // wrong alpha/beta for eps = 0.5
    CHECK_THROWS_AS(compose_and_separate(p, fbar, nu, 0.5), InvalidParameter);

    // nu = 1_X: identical arguments give separation 0, so the upstream
    // precondition necessarily failed and the eps/6 assertion fires
    const double eps = 0.5;
    auto good = build_step_polynomial(0.5, eps / 3.0, eps / 12.0);
    Measure ones(u, {1.0, 1.0});
    CHECK_THROWS_AS(compose_and_separate(good, fbar, ones, eps), Error);
}

TEST_CASE("compose_and_separate achieves eps/6 after a successful transfer") {
    // two-point pipeline fragment, eps = 0.5
    const double eps = 0.5;
    Universe u(2);
    Measure nu(u, {2.0, 0.0});
    Measure g(u, {2.0, 0.0});
    BoundedMeasure g1 = constant_one(u);
    FunctionFamily family(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});
    Mixture fbar(signed_closure(family), {1.0, 0.0});

    auto w = find_threshold(fbar, g, g1, eps);
    REQUIRE(pseudorandomness_transfer_check(nu, g, g1, w, eps) >= eps / 3.0 - 1e-9);
    auto p = build_step_polynomial(w.t, eps / 3.0, eps / 12.0);
    double sep = compose_and_separate(p, fbar, nu, eps);
    CHECK(sep >= eps / 6.0 - 1e-9);

    // sandwich holds pointwise (recomputed here, compose asserts it too)
    for (std::size_t x = 0; x < 2; ++x) {
        double z = fbar.values[x];
        double v = p.evaluate(z);
        double ft = z >= w.t ? 1.0 : 0.0;
        double fts = z >= w.t - eps / 3.0 ? 1.0 : 0.0;
        CHECK(v >= ft - eps / 12.0 - 1e-9);
        CHECK(v <= fts + eps / 12.0 + 1e-9);
    }
}
