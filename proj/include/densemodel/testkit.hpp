#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "densemodel/core.hpp"
#include "densemodel/errors.hpp"
#include "densemodel/pipeline.hpp"
#include "densemodel/rng.hpp"

namespace densemodel::testkit {

// --- deterministic family generators -----------------------------------------

/// m functions with values uniform in [-1,1]; value(i, x) depends only on
/// (seed, i*n + x), so families are reproducible and order-independent.
inline FunctionFamily gen_random_family(std::int64_t n, std::size_t m, std::uint64_t seed) {
    if (m < 1) throw InvalidParameter("family size must be >= 1");
    Universe u(n);
    std::vector<BoundedFunction> members;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (std::size_t x = 0; x < vals.size(); ++x)
            vals[x] = rng::uniform_pm1(seed, static_cast<std::uint64_t>(i) * n + x);
        members.emplace_back(u, std::move(vals));
        labels.push_back("r" + std::to_string(i));
    }
    return FunctionFamily(u, std::move(members), std::move(labels));
}

/// cos/sin characters of Z_N at the given frequencies; a natural test family
/// for cyclic universes.
inline FunctionFamily gen_character_family(std::int64_t N, const std::vector<std::int64_t>& freqs) {
    if (freqs.empty()) throw InvalidParameter("need at least one frequency");
    Universe u(N);
    std::vector<BoundedFunction> members;
    std::vector<std::string> labels;
    for (std::int64_t a : freqs) {
        std::vector<double> cosv(static_cast<std::size_t>(N)), sinv(static_cast<std::size_t>(N));
        for (std::int64_t x = 0; x < N; ++x) {
            double phase = 2.0 * M_PI * static_cast<double>(a) * static_cast<double>(x) /
                           static_cast<double>(N);
            cosv[static_cast<std::size_t>(x)] = std::cos(phase);
            sinv[static_cast<std::size_t>(x)] = std::sin(phase);
        }
        members.emplace_back(u, std::move(cosv));
        labels.push_back("cos" + std::to_string(a));
        members.emplace_back(u, std::move(sinv));
        labels.push_back("sin" + std::to_string(a));
    }
    return FunctionFamily(u, std::move(members), std::move(labels));
}

// --- set-based instances (the dense-subset interpretation) -------------------

struct FamilySpec {
    std::string id = "random";  // "random" | "characters"
    std::size_t m = 4;          // member count for "random"
    std::vector<std::int64_t> frequencies;  // for "characters"
    std::uint64_t seed = 0;
};

inline FunctionFamily build_family(std::int64_t n, const FamilySpec& spec) {
    if (spec.id == "random") return gen_random_family(n, spec.m, spec.seed);
    if (spec.id == "characters") return gen_character_family(n, spec.frequencies);
    throw InvalidParameter("unknown family generator id '" + spec.id + "'");
}

struct SetInstanceSpec {
    std::int64_t n = 0;
    std::vector<std::size_t> R;
    std::vector<std::size_t> D;  // D ⊆ R
    FamilySpec family;
    std::uint64_t seed = 0;
};

/// ν = 1_R · |X|/|R| and g = 1_D · |X|/|R|; mean(ν) = 1 and mean(g) = |D|/|R|.
inline Instance build_set_instance(const SetInstanceSpec& spec, double eps) {
    if (spec.n < 1) throw InvalidParameter("universe size must be >= 1");
    if (spec.R.empty()) throw EmptySet("R must be nonempty");
    if (spec.D.empty()) throw EmptySet("D must be nonempty");
    Universe u(spec.n);
    std::vector<bool> in_r(static_cast<std::size_t>(spec.n), false);
    for (std::size_t x : spec.R) {
        if (x >= static_cast<std::size_t>(spec.n))
            throw InvalidParameter("R contains index " + std::to_string(x) + " outside universe");
        in_r[x] = true;
    }
    const double scale = static_cast<double>(spec.n) / static_cast<double>(spec.R.size());
    std::vector<double> nu(static_cast<std::size_t>(spec.n), 0.0);
    std::vector<double> g(static_cast<std::size_t>(spec.n), 0.0);
    for (std::size_t x : spec.R) nu[x] = scale;
    for (std::size_t x : spec.D) {
        if (!in_r[x]) throw InvalidParameter("D contains index " + std::to_string(x) + " outside R");
        g[x] = scale;
    }
    return Instance(u, Measure(u, std::move(nu), "nu"), Measure(u, std::move(g), "g"),
                    build_family(spec.n, spec.family), eps);
}

/// Random D ⊆ R ⊆ X with the requested sizes, deterministic per seed.
inline SetInstanceSpec gen_set_spec(std::int64_t n, std::size_t r_size, std::size_t d_size,
                                    const FamilySpec& family, std::uint64_t seed) {
    if (r_size == 0 || d_size == 0 || d_size > r_size ||
        r_size > static_cast<std::size_t>(n))
        throw InvalidParameter("need 0 < |D| <= |R| <= n");
    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng::Stream stream(seed);
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[stream.next_below(i)]);
    SetInstanceSpec spec;
    spec.n = n;
    spec.R.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(r_size));
    spec.D.assign(spec.R.begin(), spec.R.begin() + static_cast<std::ptrdiff_t>(d_size));
    std::sort(spec.R.begin(), spec.R.end());
    std::sort(spec.D.begin(), spec.D.end());
    spec.family = family;
    spec.seed = seed;
    return spec;
}

// --- random measure-pair instances -------------------------------------------

enum class InstanceStyle {
    smooth,   // diffuse ν and g; the dense-model branch dominates
    spiky,    // g concentrates ν's mass on few points; distinguisher-prone
    bounded,  // g is itself a bounded measure, i.e. its own model
};

inline Instance gen_random_instance(std::int64_t n, std::size_t family_size, double eps,
                                    InstanceStyle style, std::uint64_t seed) {
    Universe u(n);
    rng::Stream stream(seed ^ 0xA5A5A5A5A5A5A5A5ull);
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> nu(un), g(un);

    switch (style) {
        case InstanceStyle::smooth: {
            for (std::size_t x = 0; x < un; ++x) nu[x] = 0.2 + 1.6 * stream.next01();
            break;
        }
        case InstanceStyle::spiky: {
            std::size_t spikes = std::max<std::size_t>(2, un / 8);
            for (std::size_t x = 0; x < un; ++x) nu[x] = 0.05 + 0.05 * stream.next01();
            for (std::size_t s = 0; s < spikes; ++s)
                nu[stream.next_below(un)] = 2.0 + 2.0 * stream.next01();
            break;
        }
        case InstanceStyle::bounded: {
            for (std::size_t x = 0; x < un; ++x) nu[x] = stream.next01();
            break;
        }
    }
    // normalize to mean exactly 1 (up to one rounding); keeps the k=0
    // extraction term out of play
    double total = util::kahan_total(nu);
    for (double& v : nu) v *= static_cast<double>(n) / total;

    switch (style) {
        case InstanceStyle::smooth:
            for (std::size_t x = 0; x < un; ++x) g[x] = nu[x] * (0.25 + 0.7 * stream.next01());
            break;
        case InstanceStyle::spiky:
            for (std::size_t x = 0; x < un; ++x) g[x] = nu[x] >= 1.0 ? nu[x] : 0.0;
            break;
        case InstanceStyle::bounded:
            for (std::size_t x = 0; x < un; ++x) g[x] = std::min(nu[x], 0.5 + 0.5 * stream.next01());
            break;
    }
    if (mean(PointFunction(u, g)) <= 0.0) g[0] = nu[0];  // degenerate draw guard

    return Instance(u, Measure(u, std::move(nu), "nu"), Measure(u, std::move(g), "g"),
                    gen_random_family(n, family_size, seed), eps);
}

// --- independent game oracle --------------------------------------------------

struct OracleBracket {
    double lower = 0.0;
    double upper = 0.0;
    bool converged = false;
    std::int64_t rounds = 0;
};

namespace oracle_detail {
// Deliberately separate from game.hpp's solver internals: the oracle shares
// the domain types but none of the equilibrium code.
inline std::vector<double> greedy_fill(const std::vector<double>& score, double delta) {
    const std::size_t n = score.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return score[a] != score[b] ? score[a] > score[b] : a < b;
    });
    double remaining = delta * static_cast<double>(n);
    std::vector<double> fill(n, 0.0);
    for (std::size_t r = 0; r < n && remaining > 0.0; ++r) {
        double take = std::min(1.0, remaining);
        fill[idx[r]] = take;
        remaining -= take;
    }
    return fill;
}
}  // namespace oracle_detail

/// Fictitious play on the same zero-sum game, run to the 2γ certificate or a
/// round cap. No learning rate, different update order from the MWU solver;
/// both returned bounds are exact best-response certificates, so the bracket
/// is sound whether or not it converged.
inline OracleBracket oracle_game_value(const Measure& g, const FunctionFamily& family,
                                       double delta, double gamma,
                                       std::int64_t max_rounds = 200000) {
    if (g.universe != family.universe) throw UniverseMismatch();
    const std::size_t n = g.size();
    if (static_cast<std::int64_t>(n) * static_cast<std::int64_t>(family.size()) > 1000000)
        throw BudgetExceeded("oracle guard: n * |F| exceeds 10^6");
    const FunctionFamily fprime = signed_closure(family);
    const std::size_t m = fprime.size();
    const double nreal = static_cast<double>(n);

    std::vector<double> g_inner(m);
    for (std::size_t i = 0; i < m; ++i) {
        util::KahanSum s;
        for (std::size_t x = 0; x < n; ++x) s.add(g.values[x] * fprime.members[i].values[x]);
        g_inner[i] = s.value() / nreal;
    }

    // function player's empirical play starts at the lowest-index member
    std::vector<double> femp_sum(fprime.members[0].values);
    std::vector<double> g1_sum(n, 0.0);
    std::int64_t plays = 1;

    OracleBracket best;
    best.lower = -std::numeric_limits<double>::infinity();
    best.upper = std::numeric_limits<double>::infinity();

    auto bracket = [&](std::int64_t measure_plays) {
        std::vector<double> femp(n);
        for (std::size_t x = 0; x < n; ++x) femp[x] = femp_sum[x] / static_cast<double>(plays);
        std::vector<double> opp = oracle_detail::greedy_fill(femp, delta);
        util::KahanSum lbs;
        for (std::size_t x = 0; x < n; ++x) lbs.add((g.values[x] - opp[x]) * femp[x]);
        best.lower = std::max(best.lower, lbs.value() / nreal);

        double ub = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            util::KahanSum s;
            const auto& fv = fprime.members[i].values;
            for (std::size_t x = 0; x < n; ++x)
                s.add((g.values[x] - g1_sum[x] / static_cast<double>(measure_plays)) * fv[x]);
            ub = std::max(ub, s.value() / nreal);
        }
        best.upper = std::min(best.upper, ub);
    };

    std::int64_t r = 0;
    for (r = 1; r <= max_rounds; ++r) {
        std::vector<double> femp(n);
        for (std::size_t x = 0; x < n; ++x) femp[x] = femp_sum[x] / static_cast<double>(plays);
        std::vector<double> g1 = oracle_detail::greedy_fill(femp, delta);
        for (std::size_t x = 0; x < n; ++x) g1_sum[x] += g1[x];

        std::size_t best_i = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            util::KahanSum s;
            const auto& fv = fprime.members[i].values;
            for (std::size_t x = 0; x < n; ++x) s.add(g1_sum[x] / static_cast<double>(r) * fv[x]);
            double v = g_inner[i] - s.value() / nreal;
            if (v > best_v) {
                best_v = v;
                best_i = i;
            }
        }
        const auto& fv = fprime.members[best_i].values;
        for (std::size_t x = 0; x < n; ++x) femp_sum[x] += fv[x];
        ++plays;

        if ((r & (r - 1)) == 0 || r == max_rounds) {  // powers of two + final
            bracket(r);
            if (best.upper - best.lower <= 2.0 * gamma) {
                best.converged = true;
                break;
            }
        }
    }
    best.rounds = std::min(r, max_rounds);
    if (!best.converged) best.converged = best.upper - best.lower <= 2.0 * gamma;
    return best;
}

// --- exhaustive product oracle -------------------------------------------------

struct ProductSearchResult {
    double best_value = 0.0;
    std::vector<std::size_t> best_product;  // indices into F' (signed closure)
};

/// Exhaustive max over products of up to k members of F' of |<ν-1, Π f_i>|.
/// Validates the extraction's ε' guarantee on small instances.
inline ProductSearchResult exhaustive_product_search(const Measure& nu,
                                                     const FunctionFamily& family, int k,
                                                     std::int64_t budget) {
    if (k < 1) throw InvalidParameter("k must be >= 1");
    const FunctionFamily fprime = signed_closure(family);
    long double count = 0.0L, pw = 1.0L;
    for (int kp = 1; kp <= k; ++kp) {
        pw *= static_cast<long double>(fprime.size());
        count += pw;
        if (count > 4.0e18L) break;
    }
    if (count > static_cast<long double>(budget))
        throw BudgetExceeded("product enumeration needs " + std::to_string(static_cast<double>(count)) +
                             " tuples, budget is " + std::to_string(budget));

    const std::size_t n = nu.size();
    std::vector<double> diff(n);
    for (std::size_t x = 0; x < n; ++x) diff[x] = nu.values[x] - 1.0;

    ProductSearchResult best;
    best.best_value = -1.0;
    std::vector<std::size_t> stack;
    auto dfs = [&](auto&& self, const std::vector<double>& cur) -> void {
        if (!stack.empty()) {
            util::KahanSum s;
            for (std::size_t x = 0; x < n; ++x) s.add(diff[x] * cur[x]);
            double v = std::fabs(s.value() / static_cast<double>(n));
            if (v > best.best_value) {
                best.best_value = v;
                best.best_product = stack;
            }
        }
        if (stack.size() == static_cast<std::size_t>(k)) return;
        for (std::size_t i = 0; i < fprime.size(); ++i) {
            std::vector<double> next(n);
            for (std::size_t x = 0; x < n; ++x) next[x] = cur[x] * fprime.members[i].values[x];
            stack.push_back(i);
            self(self, next);
            stack.pop_back();
        }
    };
    dfs(dfs, std::vector<double>(n, 1.0));
    return best;
}

}  // namespace densemodel::testkit
