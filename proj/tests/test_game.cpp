#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "densemodel/game.hpp"
#include "densemodel/rng.hpp"
#include "densemodel/testkit.hpp"

using namespace densemodel;

namespace {

/// Independent sample from G: random values in [0,1] adjusted to mean exactly
/// delta (scale down, or fill headroom proportionally). Used only to
/// challenge the greedy best response.
std::vector<double> random_feasible_measure(std::int64_t n, double delta, std::uint64_t seed) {
    std::vector<double> v(static_cast<std::size_t>(n));
    double total = 0.0;
    for (std::size_t x = 0; x < v.size(); ++x) {
        v[x] = rng::uniform01(seed, x);
        total += v[x];
    }
    double target = delta * static_cast<double>(n);
    if (total >= target) {
        for (double& e : v) e *= target / total;
    } else {
        double headroom = static_cast<double>(n) - total;
        double s = (target - total) / headroom;
        for (double& e : v) e += (1.0 - e) * s;
    }
    return v;
}

}  // namespace

TEST_CASE("measure_best_response greedy fill") {
    Universe u4(4);
    SECTION("constant fbar breaks ties by lowest index") {
        auto g1 = measure_best_response(std::vector<double>(4, 0.3), u4, 0.5);
        CHECK(g1.values == std::vector<double>{1.0, 1.0, 0.0, 0.0});
        CHECK(mean(g1) == Catch::Approx(0.5));
    }
    SECTION("top-2 selection") {
        auto g1 = measure_best_response(std::vector<double>{0.9, -0.2, 0.5, 0.1}, u4, 0.5);
        CHECK(g1.values == std::vector<double>{1.0, 0.0, 1.0, 0.0});
    }
    SECTION("fractional fill when delta*n is not an integer") {
        Universe u5(5);
        auto g1 = measure_best_response(std::vector<double>{5.0, 4.0, 3.0, 2.0, 1.0}, u5, 0.3);
        CHECK(g1.values == std::vector<double>{1.0, 0.5, 0.0, 0.0, 0.0});
        CHECK(mean(g1) == Catch::Approx(0.3));
    }
    SECTION("delta validation") {
        CHECK_THROWS_AS(measure_best_response(std::vector<double>(4, 0.0), u4, 0.0),
                        InvalidParameter);
        CHECK_THROWS_AS(measure_best_response(std::vector<double>(4, 0.0), u4, 1.5),
                        InvalidParameter);
    }
}

TEST_CASE("measure_best_response beats random feasible measures") {
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        std::int64_t n = 16;
        std::vector<double> fbar(static_cast<std::size_t>(n));
        for (std::size_t x = 0; x < fbar.size(); ++x) fbar[x] = rng::uniform_pm1(trial * 2 + 1, x);
        double delta = 0.05 + 0.9 * rng::uniform01(trial * 2 + 2, 0);
        auto best = measure_best_response(fbar, Universe(n), delta);
        double best_payoff = 0.0;
        for (std::size_t x = 0; x < fbar.size(); ++x) best_payoff += best.values[x] * fbar[x];
        for (std::uint64_t probe = 0; probe < 100; ++probe) {
            auto candidate = random_feasible_measure(n, delta, trial * 1000 + probe);
            double payoff = 0.0;
            for (std::size_t x = 0; x < fbar.size(); ++x) payoff += candidate[x] * fbar[x];
            REQUIRE(best_payoff >= payoff - 1e-9);
        }
    }
}

TEST_CASE("function_best_response") {
    Universe u(6);
    auto family = testkit::gen_random_family(6, 3, 61);
    auto fprime = signed_closure(family);

    SECTION("zero difference gives zero payoff") {
        Measure g(u, std::vector<double>(6, 0.5));
        BoundedMeasure g1(u, std::vector<double>(6, 0.5));
        auto br = function_best_response(g, g1, fprime);
        CHECK(br.payoff == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("sign folding: payoff equals |<g-g1, f>| for F'={f,-f}") {
        FunctionFamily single(u, {family.members[0]}, {"f"});
        auto sc = signed_closure(single);
        std::vector<double> gv(6), g1v(6);
        for (std::size_t x = 0; x < 6; ++x) {
            gv[x] = rng::uniform01(71, x);
            g1v[x] = rng::uniform01(72, x) * 0.5;
        }
        double mg = 0.0;
        for (double v : gv) mg += v;
        for (double& v : gv) v *= 6.0 / mg / 2.0;
        Measure g(u, gv);
        BoundedMeasure g1(u, g1v);
        auto br = function_best_response(g, g1, sc);
        std::vector<double> diff(6);
        for (std::size_t x = 0; x < 6; ++x) diff[x] = gv[x] - g1v[x];
        CHECK(br.payoff ==
              Catch::Approx(std::fabs(inner(PointFunction(u, diff), single.members[0])))
                  .margin(1e-12));
    }
    SECTION("random instance agrees with a direct scan") {
        std::vector<double> gv(6), g1v(6);
        for (std::size_t x = 0; x < 6; ++x) {
            gv[x] = rng::uniform01(81, x);
            g1v[x] = rng::uniform01(82, x);
        }
        double mg = 0.0;
        for (double v : gv) mg += v;
        for (double& v : gv) v *= 6.0 / mg;
        Measure g(u, gv);
        BoundedMeasure g1(u, g1v);
        auto br = function_best_response(g, g1, fprime);
        double expect = -2.0;
        std::size_t expect_idx = 0;
        for (std::size_t i = 0; i < fprime.size(); ++i) {
            double s = 0.0;
            for (std::size_t x = 0; x < 6; ++x)
                s += (gv[x] - g1v[x]) * fprime.members[i].values[x];
            s /= 6.0;
            if (s > expect) {
                expect = s;
                expect_idx = i;
            }
        }
        CHECK(br.index == expect_idx);
        CHECK(br.payoff == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("solve_game: g in G makes the dense-model hook fire") {
    auto inst = testkit::gen_random_instance(16, 4, 0.1, testkit::InstanceStyle::bounded, 5);
    GameConfig cfg;
    cfg.delta = inst.delta();
    cfg.gamma = 0.02;
    auto res = solve_game(inst.g, inst.family, cfg);
    CHECK(res.upper_bound <= 2.0 * cfg.gamma);
    CHECK(res.lower_bound <= res.upper_bound + 1e-12);
}

TEST_CASE("solve_game: 2-point game has value exactly 1") {
    Universe u(2);
    Measure g(u, {2.0, 0.0});
    FunctionFamily family(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});
    GameConfig cfg;
    cfg.delta = 1.0;  // G = {1_X}
    cfg.gamma = 0.01;
    auto res = solve_game(g, family, cfg);
    CHECK(res.lower_bound <= 1.0 + 1e-12);
    CHECK(res.upper_bound >= 1.0 - 1e-12);
    CHECK(res.upper_bound - res.lower_bound <= 2.0 * cfg.gamma + 1e-12);
    CHECK(mean(res.avg_measure) == Catch::Approx(1.0));
}

TEST_CASE("solve_game certificate properties on random instances") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto inst = testkit::gen_random_instance(8, 4, 0.1, testkit::InstanceStyle::smooth, seed);
        GameConfig cfg;
        cfg.delta = inst.delta();
        cfg.gamma = 0.02;
        auto res = solve_game(inst.g, inst.family, cfg);

        CHECK(res.upper_bound - res.lower_bound <= 2.0 * cfg.gamma + 1e-12);
        CHECK(res.lower_bound <= res.upper_bound + 1e-12);

        // avg_measure stays in G
        CHECK(mean(res.avg_measure) == Catch::Approx(cfg.delta).margin(1e-9));
        for (double v : res.avg_measure.values) {
            CHECK(v >= -kTol);
            CHECK(v <= 1.0 + kTol);
        }
        // mixture evaluation stays in [-1,1]
        for (double v : res.mixture.values) {
            CHECK(v >= -1.0 - 1e-9);
            CHECK(v <= 1.0 + 1e-9);
        }
        // the bounds are exact best responses: recompute both
        auto opp = measure_best_response(res.mixture, cfg.delta);
        double lb = inner(inst.g, res.mixture.as_point_function()) -
                    inner(opp, res.mixture.as_point_function());
        CHECK(lb == Catch::Approx(res.lower_bound).margin(1e-9));
        auto fprime = signed_closure(inst.family);
        auto ub = function_best_response(inst.g, res.avg_measure, fprime);
        CHECK(ub.payoff == Catch::Approx(res.upper_bound).margin(1e-9));

        // cross-check against the independent oracle bracket
        auto oracle = testkit::oracle_game_value(inst.g, inst.family, cfg.delta, 0.05);
        CHECK(res.lower_bound <= oracle.upper + 1e-9);
        CHECK(oracle.lower <= res.upper_bound + 1e-9);
    }
}

TEST_CASE("solve_game bracket is non-increasing when rounds double") {
    auto inst = testkit::gen_random_instance(12, 4, 0.1, testkit::InstanceStyle::smooth, 77);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (std::int64_t rounds : {64, 128, 256, 512}) {
        GameConfig cfg;
        cfg.delta = inst.delta();
        cfg.gamma = 1e-5;  // unreachable: force the full round budget
        cfg.max_rounds = rounds;
        double gap;
        try {
            auto res = solve_game(inst.g, inst.family, cfg);
            gap = res.upper_bound - res.lower_bound;
        } catch (const NoCertificate& e) {
            gap = e.partial.upper_bound - e.partial.lower_bound;
        }
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
}

TEST_CASE("solve_game error paths") {
    auto inst = testkit::gen_random_instance(8, 3, 0.1, testkit::InstanceStyle::smooth, 3);
    GameConfig cfg;
    cfg.delta = inst.delta();

    SECTION("delta must match mean(g)") {
        GameConfig bad = cfg;
        bad.delta = std::min(1.0, cfg.delta + 0.2);
        CHECK_THROWS_AS(solve_game(inst.g, inst.family, bad), InvalidParameter);
    }
    SECTION("NoCertificate carries a sound partial result") {
        GameConfig tiny = cfg;
        tiny.gamma = 1e-6;
        tiny.max_rounds = 2;
        try {
            solve_game(inst.g, inst.family, tiny);
            FAIL("expected NoCertificate");
        } catch (const NoCertificate& e) {
            CHECK(e.partial.rounds_used == 2);
            CHECK(e.partial.lower_bound <= e.partial.upper_bound + 1e-12);
        }
    }
    SECTION("config validation") {
        GameConfig bad = cfg;
        bad.gamma = 0.0;
        CHECK_THROWS_AS(solve_game(inst.g, inst.family, bad), InvalidParameter);
        bad = cfg;
        bad.max_rounds = 0;
        CHECK_THROWS_AS(solve_game(inst.g, inst.family, bad), InvalidParameter);
    }
}

TEST_CASE("mixture validation") {
    auto family = testkit::gen_random_family(4, 2, 9);
    auto fprime = signed_closure(family);
    CHECK_THROWS_AS(Mixture(fprime, {0.5, 0.5}), ValidationError);          // wrong arity
    CHECK_THROWS_AS(Mixture(fprime, {0.9, 0.4, -0.3, 0.0}), ValidationError);  // negative
    CHECK_NOTHROW(Mixture(fprime, {0.25, 0.25, 0.25, 0.25}));
}
