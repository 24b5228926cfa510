#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "densemodel/core.hpp"
#include "densemodel/errors.hpp"

namespace densemodel {

/// Convex combination of F' members: the function player's mixed strategy.
struct Mixture {
    FunctionFamily family;        // the signed closure F'
    std::vector<double> weights;  // >= 0, sums to 1
    std::vector<double> values;   // Σ_i w_i f_i(x), cached; stays in [-1,1]

    Mixture() = default;
    Mixture(FunctionFamily fam, std::vector<double> w)
        : family(std::move(fam)), weights(std::move(w)) {
        if (weights.size() != family.size())
            throw ValidationError("mixture.weights", "weight count differs from family size");
        double total = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] < -kTol)
                throw ValidationError("mixture.weights[" + std::to_string(i) + "]", "negative weight");
            total += weights[i];
        }
        if (std::fabs(total - 1.0) > 1e-6)
            throw ValidationError("mixture.weights", "weights sum to " + std::to_string(total));
        values.assign(family.members.front().size(), 0.0);
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const auto& fv = family.members[i].values;
            for (std::size_t x = 0; x < values.size(); ++x) values[x] += weights[i] * fv[x];
        }
        for (std::size_t x = 0; x < values.size(); ++x)
            if (values[x] < -1.0 - 1e-7 || values[x] > 1.0 + 1e-7)
                throw ValidationError("mixture", "evaluation left [-1,1] at point " + std::to_string(x));
    }

    double evaluate(std::size_t x) const { return values[x]; }
    Universe universe() const { return family.universe; }

    PointFunction as_point_function() const { return PointFunction(family.universe, values); }
};

struct GameConfig {
    double delta = 0.0;   // target expectation of the measure player's set G
    double gamma = 0.01;  // additive equilibrium accuracy of the certificate
    std::optional<std::int64_t> max_rounds;  // default: the regret-bound round count
    std::optional<double> eta;               // default: gamma / 8

    // Early-stop hooks (artifact plumbing): stop once the certified bracket
    // already routes the dichotomy, without converging to the full 2γ gap.
    std::optional<double> stop_when_lower_above;
    std::optional<double> stop_when_upper_at_most;

    void validate() const {
        if (!(delta > 0.0 && delta <= 1.0)) throw InvalidParameter("delta must lie in (0,1]");
        if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidParameter("gamma must lie in (0,1)");
        if (max_rounds && *max_rounds < 1) throw InvalidParameter("max_rounds must be >= 1");
        if (eta && *eta <= 0.0) throw InvalidParameter("eta must be positive");
    }
};

struct GameResult {
    Mixture mixture;            // f̄: average of the per-round mixtures
    BoundedMeasure avg_measure; // ḡ1: average of the measure player's best responses
    double lower_bound = 0.0;   // min_{g1 in G} <g - g1, f̄>, exact best response
    double upper_bound = 0.0;   // max_{f in F'} <g - ḡ1, f>, exact best response
    std::int64_t rounds_used = 0;
};

/// Thrown when max_rounds is exhausted before the bracket closes to 2γ.
/// Carries the partial result; both bounds remain sound certificates.
struct NoCertificate : Error {
    GameResult partial;
    NoCertificate(std::string what, GameResult r) : Error(std::move(what)), partial(std::move(r)) {}
};

namespace detail {
/// Greedy fill on raw values: 1 on the ⌊δn⌋ largest entries of fbar (ties by
/// lowest index), the fractional remainder δn - ⌊δn⌋ on the next entry.
inline std::vector<double> greedy_measure_values(const std::vector<double>& fbar, double delta) {
    const std::size_t n = fbar.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (fbar[a] != fbar[b]) return fbar[a] > fbar[b];
        return a < b;
    });
    double target = delta * static_cast<double>(n);
    if (target > static_cast<double>(n)) target = static_cast<double>(n);
    auto whole = static_cast<std::size_t>(std::floor(target));
    double frac = target - static_cast<double>(whole);

    std::vector<double> g1(n, 0.0);
    for (std::size_t r = 0; r < whole && r < n; ++r) g1[order[r]] = 1.0;
    if (frac > 0.0 && whole < n) g1[order[whole]] = frac;
    return g1;
}
}  // namespace detail

/// The measure player's exact best response: the bounded measure of mean δ
/// maximizing <g1, f̄> (equivalently minimizing <g - g1, f̄>).
inline BoundedMeasure measure_best_response(const std::vector<double>& fbar_values, Universe u,
                                            double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidParameter("delta must lie in (0,1]");
    if (static_cast<std::int64_t>(fbar_values.size()) != u.n)
        throw UniverseMismatch("best response values do not match universe");
    return BoundedMeasure(u, detail::greedy_measure_values(fbar_values, delta));
}

inline BoundedMeasure measure_best_response(const Mixture& fbar, double delta) {
    return measure_best_response(fbar.values, fbar.universe(), delta);
}

inline BoundedMeasure measure_best_response(const PointFunction& fbar, double delta) {
    return measure_best_response(fbar.values, fbar.universe, delta);
}

struct BestResponse {
    std::size_t index = 0;
    double payoff = 0.0;
};

/// The function player's exact best response: argmax_{f in F'} <g - g1, f>,
/// lowest index on ties. No absolute value; F' contains the negations.
inline BestResponse function_best_response(const Measure& g, const BoundedMeasure& g1,
                                           const FunctionFamily& fprime) {
    if (g.universe != g1.universe || g.universe != fprime.universe) throw UniverseMismatch();
    const std::size_t n = g.size();
    std::vector<double> diff(n);
    for (std::size_t x = 0; x < n; ++x) diff[x] = g.values[x] - g1.values[x];
    BestResponse best;
    double bestv = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fprime.size(); ++i) {
        util::KahanSum s;
        const auto& fv = fprime.members[i].values;
        for (std::size_t x = 0; x < n; ++x) s.add(diff[x] * fv[x]);
        double v = s.value() / static_cast<double>(n);
        if (v > bestv) {
            bestv = v;
            best.index = i;
            best.payoff = v;
        }
    }
    return best;
}

/// Multiplicative-weights solution of the zero-sum game between mixtures over
/// F' and the polytope G of bounded measures with mean δ.
///
/// Regret accounting (standard MWU): payoffs <g - g1, f_i> lie in [-2, 2];
/// with η = γ/8 and T = ⌈16 ln|F'| / γ²⌉ rounds the average regret is at most
/// γ, hence the exact best-response bracket of the averaged strategies closes
/// to upper - lower <= 2γ. Both bounds are sound at every round because they
/// come from exact best responses against fixed averaged strategies.
inline GameResult solve_game(const Measure& g, const FunctionFamily& family, GameConfig config) {
    config.validate();
    if (g.universe != family.universe) throw UniverseMismatch();
    if (std::fabs(mean(g) - config.delta) > 1e-7)
        throw InvalidParameter("config.delta " + std::to_string(config.delta) +
                               " does not match mean(g) = " + std::to_string(mean(g)));

    const FunctionFamily fprime = signed_closure(family);
    const std::size_t m = fprime.size();
    const std::size_t n = g.size();
    const double nreal = static_cast<double>(n);
    const double gamma = config.gamma;
    const double eta = config.eta.value_or(gamma / 8.0);

    const auto planned = static_cast<std::int64_t>(
        std::ceil(16.0 * std::log(static_cast<double>(m)) / (gamma * gamma)));
    const std::int64_t max_rounds = config.max_rounds.value_or(std::max<std::int64_t>(planned, 1));

    // <g, f_i> is round-independent.
    std::vector<double> g_inner(m);
    for (std::size_t i = 0; i < m; ++i) {
        util::KahanSum s;
        for (std::size_t x = 0; x < n; ++x) s.add(g.values[x] * fprime.members[i].values[x]);
        g_inner[i] = s.value() / nreal;
    }

    std::vector<double> w(m, 1.0);
    std::vector<double> lambda(m), fbar(n);
    std::vector<double> lambda_sum(m, 0.0), g1_sum(n, 0.0);
    std::vector<std::size_t> support;
    support.reserve(n);

    // Best certified pieces seen so far. The mixture for the lower bound and
    // the averaged measure for the upper bound may come from different
    // checkpoints; each bound is exact for its own strategy.
    double best_lb = -std::numeric_limits<double>::infinity();
    double best_ub = std::numeric_limits<double>::infinity();
    std::vector<double> best_lambda, best_g1;

    auto checkpoint = [&](std::int64_t r) -> bool {
        const double inv_r = 1.0 / static_cast<double>(r);
        std::vector<double> lam(m);
        for (std::size_t i = 0; i < m; ++i) lam[i] = lambda_sum[i] * inv_r;
        std::vector<double> fb(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& fv = fprime.members[i].values;
            for (std::size_t x = 0; x < n; ++x) fb[x] += lam[i] * fv[x];
        }
        std::vector<double> opp = detail::greedy_measure_values(fb, config.delta);
        util::KahanSum lbs;
        for (std::size_t x = 0; x < n; ++x) lbs.add((g.values[x] - opp[x]) * fb[x]);
        double lb = lbs.value() / nreal;

        std::vector<double> gbar(n);
        for (std::size_t x = 0; x < n; ++x) gbar[x] = g1_sum[x] * inv_r;
        double ub = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            util::KahanSum s;
            const auto& fv = fprime.members[i].values;
            for (std::size_t x = 0; x < n; ++x) s.add((g.values[x] - gbar[x]) * fv[x]);
            ub = std::max(ub, s.value() / nreal);
        }

        if (lb > best_lb) {
            best_lb = lb;
            best_lambda = std::move(lam);
        }
        if (ub < best_ub) {
            best_ub = ub;
            best_g1 = std::move(gbar);
        }
        if (best_ub - best_lb <= 2.0 * gamma) return true;
        if (config.stop_when_lower_above && best_lb > *config.stop_when_lower_above) return true;
        if (config.stop_when_upper_at_most && best_ub <= *config.stop_when_upper_at_most) return true;
        return false;
    };

    std::int64_t rounds_used = 0;
    std::int64_t next_check = 1;
    bool certified = false;
    for (std::int64_t r = 1; r <= max_rounds; ++r) {
        double wsum = 0.0;
        for (double wi : w) wsum += wi;
        for (std::size_t i = 0; i < m; ++i) lambda[i] = w[i] / wsum;
        for (std::size_t i = 0; i < m; ++i) lambda_sum[i] += lambda[i];

        std::fill(fbar.begin(), fbar.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& fv = fprime.members[i].values;
            const double li = lambda[i];
            for (std::size_t x = 0; x < n; ++x) fbar[x] += li * fv[x];
        }

        std::vector<double> g1 = detail::greedy_measure_values(fbar, config.delta);
        for (std::size_t x = 0; x < n; ++x) g1_sum[x] += g1[x];

        // reward_i = <g - g1, f_i> = g_inner[i] - <g1, f_i>; g1's support has
        // ⌈δn⌉ points, so iterate only those. Plain sums here: only the
        // checkpoint certificates need compensated arithmetic.
        support.clear();
        for (std::size_t x = 0; x < n; ++x)
            if (g1[x] != 0.0) support.push_back(x);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& fv = fprime.members[i].values;
            double s = 0.0;
            for (std::size_t x : support) s += g1[x] * fv[x];
            double reward = g_inner[i] - s / nreal;
            w[i] *= std::exp(eta * reward);
        }
        // renormalize every round so exp-updates cannot underflow
        double norm = 0.0;
        for (double wi : w) norm += wi;
        for (double& wi : w) wi /= norm;

        rounds_used = r;
        if (r == next_check || r == max_rounds) {
            if (checkpoint(r)) {
                certified = true;
                break;
            }
            next_check = std::min<std::int64_t>(next_check * 2, next_check + 16384);
        }
    }

    GameResult result;
    result.mixture = Mixture(fprime, best_lambda);
    result.avg_measure = BoundedMeasure(g.universe, best_g1);
    result.lower_bound = best_lb;
    result.upper_bound = best_ub;
    result.rounds_used = rounds_used;

    if (!certified && best_ub - best_lb > 2.0 * gamma)
        throw NoCertificate("bracket gap " + std::to_string(best_ub - best_lb) +
                                " still above 2*gamma after " + std::to_string(rounds_used) +
                                " rounds",
                            std::move(result));
    return result;
}

}  // namespace densemodel
