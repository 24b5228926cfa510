#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "densemodel/core.hpp"
#include "densemodel/rng.hpp"
#include "densemodel/testkit.hpp"

using namespace densemodel;

namespace {

PointFunction pf(std::initializer_list<double> vals) {
    std::vector<double> v(vals);
    return PointFunction(Universe(static_cast<std::int64_t>(v.size())), v);
}

FunctionFamily random_family(std::int64_t n, std::size_t m, std::uint64_t seed) {
    return testkit::gen_random_family(n, m, seed);
}

PointFunction random_function(std::int64_t n, std::uint64_t seed, double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (std::size_t x = 0; x < v.size(); ++x) v[x] = scale * rng::uniform_pm1(seed, x);
    return PointFunction(Universe(n), v);
}

}  // namespace

TEST_CASE("inner product matches the defining sum") {
    Universe u(3);
    auto ones = constant_one(u);
    CHECK(inner(ones, ones) == Catch::Approx(1.0));

    PointFunction zero(u, {0.0, 0.0, 0.0});
    auto f = random_function(3, 99);
    CHECK(inner(f, zero) == 0.0);

    CHECK(inner(pf({1.0, -1.0}), pf({0.5, 1.0})) == Catch::Approx(-0.25));

    CHECK_THROWS_AS(inner(pf({1.0, 2.0}), pf({1.0, 2.0, 3.0})), UniverseMismatch);
}

TEST_CASE("constant_one is the mean functional") {
    Universe u(3);
    auto one = constant_one(u);
    CHECK(one.values == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(mean(one) == Catch::Approx(1.0));

    auto g = random_function(3, 5);
    CHECK(inner(one, g) == Catch::Approx(mean(g)));
}

TEST_CASE("distinguishability: trivial cases and exhaustive-scan oracle") {
    Universe u2(2);
    FunctionFamily flat(u2, {BoundedFunction(u2, {1.0, 1.0})}, {"flat"});
    Measure g(u2, {2.0, 0.0});
    auto h = constant_one(u2);
    auto d = distinguishability(g, h, flat);
    CHECK(d.value == Catch::Approx(0.0).margin(1e-15));  // equal means

    auto self = distinguishability(g, g, flat);
    CHECK(self.value == 0.0);
    CHECK(self.witness == 0);

    // random 4-point instance against an independent direct loop
    Universe u4(4);
    auto family = random_family(4, 3, 11);
    auto a = random_function(4, 21);
    auto b = random_function(4, 22);
    auto got = distinguishability(a, b, family);
    double expect = 0.0;
    std::size_t expect_idx = 0;
    for (std::size_t i = 0; i < family.size(); ++i) {
        double s = 0.0;
        for (std::size_t x = 0; x < 4; ++x)
            s += (a.values[x] - b.values[x]) * family.members[i].values[x];
        s = std::fabs(s / 4.0);
        if (s > expect) {
            expect = s;
            expect_idx = i;
        }
    }
    CHECK(got.value == Catch::Approx(expect).margin(1e-12));
    CHECK(got.witness == expect_idx);
}

TEST_CASE("is_pseudorandom") {
    Universe u(2);
    auto one = constant_one(u);
    FunctionFamily split(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});
    CHECK(is_pseudorandom(Measure(u, one.values), split, 0.5).pseudorandom);

    // nu = 2 * indicator of the first half: the split function sees violation 1
    Measure nu(u, {2.0, 0.0});
    auto verdict = is_pseudorandom(nu, split, 0.5);
    CHECK_FALSE(verdict.pseudorandom);
    CHECK(verdict.worst.value == Catch::Approx(1.0));

    // |<nu-1, f>| <= E|nu-1| <= 2 is forced, so eps=2 always passes
    Universe u8(8);
    std::vector<double> vals(8);
    for (std::size_t x = 0; x < 8; ++x) vals[x] = rng::uniform01(7, x);
    double m = 0.0;
    for (double v : vals) m += v;
    for (double& v : vals) v *= 8.0 / m;
    CHECK(is_pseudorandom(Measure(u8, vals), random_family(8, 5, 3), 2.0).pseudorandom);

    CHECK_THROWS_AS(is_pseudorandom(nu, split, 0.0), InvalidParameter);
}

TEST_CASE("signed_closure doubles the family, originals first") {
    auto family = random_family(6, 3, 17);
    auto closed = signed_closure(family);
    REQUIRE(closed.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t x = 0; x < 6; ++x) {
            CHECK(closed.members[i].values[x] == family.members[i].values[x]);
            CHECK(closed.members[i + 3].values[x] == -family.members[i].values[x]);
        }
    }
    // no dedup by design
    CHECK(signed_closure(closed).size() == 12);

    // removing absolute values: max over F' of <u,f> equals max over F of |<u,f>|
    auto un = random_function(6, 23);
    double max_signed = -2.0;
    for (const auto& f : closed.members) max_signed = std::max(max_signed, inner(un, f));
    CHECK(max_signed == Catch::Approx(family_seminorm(un, family)).margin(1e-12));
}

TEST_CASE("product_function") {
    Universe u(2);
    BoundedFunction f(u, {1.0, -1.0});
    auto single = product_function({f});
    CHECK(single.values == f.values);
    auto sq = product_function({f, f});
    CHECK(sq.values == std::vector<double>{1.0, 1.0});

    auto one = constant_one(u);
    BoundedFunction onef(u, one.values);
    auto prod = product_function({onef, onef, onef});
    CHECK(prod.values == one.values);

    CHECK_THROWS_AS(product_function({}), InvalidParameter);
}

TEST_CASE("product_function stays in [-1,1] on random inputs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto family = random_family(8, 4, seed);
        auto prod = product_function(family.members);
        for (double v : prod.values) {
            CHECK(v <= 1.0 + kTol);
            CHECK(v >= -1.0 - kTol);
        }
    }
}

TEST_CASE("family_power_check") {
    Universe u(2);
    Measure nu(u, {2.0, 0.0});
    FunctionFamily split(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});

    SECTION("k=1 reduces to is_pseudorandom") {
        auto verdict = family_power_check(nu, split, 1, 0.5, 100);
        auto direct = is_pseudorandom(nu, split, 0.5);
        REQUIRE(verdict.definitive);
        CHECK(verdict.pseudorandom == direct.pseudorandom);
        CHECK(verdict.worst_value == Catch::Approx(direct.worst.value));
    }

    SECTION("|F|=2, k=2 enumerates 2 singletons + 4 pairs") {
        auto family = random_family(4, 2, 31);
        Measure m(Universe(4), {1.0, 1.0, 1.0, 1.0});
        auto verdict = family_power_check(m, family, 2, 1.0, 6);
        CHECK(verdict.definitive);
        auto skipped = family_power_check(m, family, 2, 1.0, 5);
        CHECK_FALSE(skipped.definitive);
    }

    SECTION("random 6-point instance agrees with a nested-loop oracle") {
        Universe u6(6);
        std::vector<double> vals(6);
        for (std::size_t x = 0; x < 6; ++x) vals[x] = 2.0 * rng::uniform01(41, x);
        double m = 0.0;
        for (double v : vals) m += v;
        for (double& v : vals) v *= 6.0 / m;
        Measure nu6(u6, vals);
        auto family = random_family(6, 2, 43);

        auto verdict = family_power_check(nu6, family, 2, 0.05, 1000);
        REQUIRE(verdict.definitive);

        double oracle = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            double s = 0.0;
            for (std::size_t x = 0; x < 6; ++x)
                s += (nu6.values[x] - 1.0) * family.members[i].values[x];
            oracle = std::max(oracle, std::fabs(s / 6.0));
            for (std::size_t j = 0; j < 2; ++j) {
                double s2 = 0.0;
                for (std::size_t x = 0; x < 6; ++x)
                    s2 += (nu6.values[x] - 1.0) * family.members[i].values[x] *
                          family.members[j].values[x];
                oracle = std::max(oracle, std::fabs(s2 / 6.0));
            }
        }
        CHECK(verdict.worst_value == Catch::Approx(oracle).margin(1e-12));
        CHECK(verdict.pseudorandom == (oracle <= 0.05));
    }
}

TEST_CASE("family_seminorm") {
    Universe u(3);
    PointFunction zero(u, {0.0, 0.0, 0.0});
    auto family = random_family(3, 4, 51);
    CHECK(family_seminorm(zero, family) == 0.0);

    auto un = random_function(3, 53);
    double base = family_seminorm(un, family);
    std::vector<double> scaled(un.values);
    for (double& v : scaled) v *= -2.5;
    CHECK(family_seminorm(PointFunction(u, scaled), family) ==
          Catch::Approx(2.5 * base).margin(1e-12));

    // F = all 2^3 sign vectors: the seminorm is the mean-l1 norm
    std::vector<BoundedFunction> signs;
    std::vector<std::string> labels;
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<double> v(3);
        for (int b = 0; b < 3; ++b) v[static_cast<std::size_t>(b)] = (mask >> b) & 1 ? 1.0 : -1.0;
        signs.emplace_back(u, v);
        labels.push_back("s" + std::to_string(mask));
    }
    FunctionFamily all_signs(u, signs, labels);
    double l1 = (std::fabs(un.values[0]) + std::fabs(un.values[1]) + std::fabs(un.values[2])) / 3.0;
    CHECK(family_seminorm(un, all_signs) == Catch::Approx(l1).margin(1e-12));
}

TEST_CASE("core invariants hold on random inputs") {
    SECTION("bilinearity") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto un = random_function(8, seed * 3 + 1);
            auto v = random_function(8, seed * 3 + 2);
            double a = 3.0 * rng::uniform_pm1(seed, 777);
            auto f = random_function(8, seed * 3 + 3);
            std::vector<double> combo(8);
            for (std::size_t x = 0; x < 8; ++x) combo[x] = a * un.values[x] + v.values[x];
            double lhs = inner(PointFunction(Universe(8), combo), f);
            double rhs = a * inner(un, f) + inner(v, f);
            CHECK(lhs == Catch::Approx(rhs).epsilon(1e-9).margin(1e-12));
        }
    }
    SECTION("triangle inequality for the seminorm") {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto family = random_family(8, 5, seed + 100);
            auto un = random_function(8, seed * 7 + 1);
            auto v = random_function(8, seed * 7 + 2);
            std::vector<double> sum(8);
            for (std::size_t x = 0; x < 8; ++x) sum[x] = un.values[x] + v.values[x];
            CHECK(family_seminorm(PointFunction(Universe(8), sum), family) <=
                  family_seminorm(un, family) + family_seminorm(v, family) + 1e-9);
        }
    }
    SECTION("distinguishability equals the seminorm of the difference") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto family = random_family(8, 4, seed + 200);
            auto a = random_function(8, seed * 11 + 1);
            auto b = random_function(8, seed * 11 + 2);
            std::vector<double> diff(8);
            for (std::size_t x = 0; x < 8; ++x) diff[x] = a.values[x] - b.values[x];
            CHECK(distinguishability(a, b, family).value ==
                  family_seminorm(PointFunction(Universe(8), diff), family));
        }
    }
    SECTION("monotonicity <f,g> <= <f,nu> for f >= 0 and g <= nu") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Universe u(8);
            std::vector<double> fv(8), nuv(8), gv(8);
            for (std::size_t x = 0; x < 8; ++x) {
                fv[x] = rng::uniform01(seed * 13 + 1, x);
                nuv[x] = 2.0 * rng::uniform01(seed * 13 + 2, x);
                gv[x] = nuv[x] * rng::uniform01(seed * 13 + 3, x);
            }
            double mn = 0.0;
            for (double v : nuv) mn += v;
            for (std::size_t x = 0; x < 8; ++x) {
                nuv[x] *= 8.0 / mn;
                gv[x] *= 8.0 / mn;
            }
            BoundedFunction f(u, fv);
            Measure nu(u, nuv), g(u, gv);
            CHECK(inner(f, g) <= inner(f, nu) + 1e-12);
        }
    }
}

TEST_CASE("constructors reject out-of-range values instead of clamping") {
    Universe u(2);
    CHECK_THROWS_AS(Measure(u, {-0.5, 1.0}), ValidationError);
    CHECK_THROWS_AS(Measure(u, {3.0, 1.0}), ValidationError);  // mean 2 > 1
    CHECK_THROWS_AS(BoundedMeasure(u, {1.5, 0.0}), ValidationError);
    CHECK_THROWS_AS(BoundedFunction(u, {1.2, 0.0}), ValidationError);
    CHECK_THROWS_AS(Universe(0), InvalidParameter);
    CHECK_THROWS_AS(PointFunction(u, {1.0}), ValidationError);
    CHECK_THROWS_AS(PointFunction(u, {1.0, std::numeric_limits<double>::infinity()}),
                    ValidationError);

    // within-tolerance values are accepted
    CHECK_NOTHROW(Measure(u, {-0.5 * kTol, 1.0}));
    CHECK_NOTHROW(BoundedFunction(u, {1.0 + 0.5 * kTol, -1.0}));

    BoundedFunction f(u, {1.0, -1.0});
    CHECK_THROWS_AS(FunctionFamily(u, {f, f}, {"a", "a"}), ValidationError);
    CHECK_THROWS_AS(FunctionFamily(u, {}, {}), ValidationError);
}
