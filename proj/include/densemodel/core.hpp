#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "densemodel/errors.hpp"
#include "densemodel/util.hpp"

namespace densemodel {

/// Global tolerance for invariant checks. The theorem's inequalities all have
/// Θ(ε) slack, so anything far below that works; constructors reject values
/// out of range beyond kTol instead of clamping.
inline constexpr double kTol = 1e-9;

/// The finite universe X, represented as indices 0..n-1.
struct Universe {
    std::int64_t n = 0;

    Universe() = default;
    explicit Universe(std::int64_t points) : n(points) {
        if (n < 1) throw InvalidParameter("universe size must be >= 1, got " + std::to_string(n));
    }

    friend bool operator==(const Universe& a, const Universe& b) { return a.n == b.n; }
    friend bool operator!=(const Universe& a, const Universe& b) { return !(a == b); }
};

/// A real-valued function on the universe, stored densely.
struct PointFunction {
    Universe universe;
    std::vector<double> values;

    PointFunction() = default;
    PointFunction(Universe u, std::vector<double> vals, const std::string& field = "values")
        : universe(u), values(std::move(vals)) {
        if (static_cast<std::int64_t>(values.size()) != universe.n)
            throw ValidationError(field, "length " + std::to_string(values.size()) +
                                             " does not match universe size " + std::to_string(universe.n));
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i]))
                throw ValidationError(field + "[" + std::to_string(i) + "]", "value is not finite");
    }

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

inline double mean(const PointFunction& f) {
    return util::kahan_total(f.values) / static_cast<double>(f.universe.n);
}

/// Nonnegative function with mean at most 1.
struct Measure : PointFunction {
    Measure() = default;
    Measure(Universe u, std::vector<double> vals, const std::string& field = "measure")
        : PointFunction(u, std::move(vals), field) {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] < -kTol)
                throw ValidationError(field + "[" + std::to_string(i) + "]",
                                      "measure value " + std::to_string(values[i]) + " is negative");
        double m = mean(*this);
        if (m > 1.0 + kTol)
            throw ValidationError(field, "measure mean " + std::to_string(m) + " exceeds 1");
    }
};

/// Measure with values in [0, 1].
struct BoundedMeasure : Measure {
    BoundedMeasure() = default;
    BoundedMeasure(Universe u, std::vector<double> vals, const std::string& field = "bounded_measure")
        : Measure(u, std::move(vals), field) {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] > 1.0 + kTol)
                throw ValidationError(field + "[" + std::to_string(i) + "]",
                                      "bounded measure value " + std::to_string(values[i]) + " exceeds 1");
    }
};

/// Test function with values in [-1, 1].
struct BoundedFunction : PointFunction {
    BoundedFunction() = default;
    BoundedFunction(Universe u, std::vector<double> vals, const std::string& field = "bounded_function")
        : PointFunction(u, std::move(vals), field) {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (values[i] < -1.0 - kTol || values[i] > 1.0 + kTol)
                throw ValidationError(field + "[" + std::to_string(i) + "]",
                                      "value " + std::to_string(values[i]) + " outside [-1,1]");
    }
};

/// The family F: an ordered, labelled, finite collection of bounded functions.
/// Labels are mandatory so distinguisher witnesses are readable in CLI output.
struct FunctionFamily {
    Universe universe;
    std::vector<BoundedFunction> members;
    std::vector<std::string> labels;

    FunctionFamily() = default;
    FunctionFamily(Universe u, std::vector<BoundedFunction> fs, std::vector<std::string> names)
        : universe(u), members(std::move(fs)), labels(std::move(names)) {
        if (members.empty()) throw ValidationError("family", "family must be nonempty");
        if (labels.size() != members.size())
            throw ValidationError("family.labels", "labels must be parallel to members");
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i].universe != universe)
                throw ValidationError("family.members[" + std::to_string(i) + "]",
                                      "member universe differs from family universe");
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!seen.insert(labels[i]).second)
                throw ValidationError("family.labels[" + std::to_string(i) + "]",
                                      "duplicate label '" + labels[i] + "'");
    }

    std::size_t size() const { return members.size(); }
};

// --- §1 primitives ----------------------------------------------------------

/// <f, g> = E_x f(x) g(x).
inline double inner(const PointFunction& f, const PointFunction& g) {
    if (f.universe != g.universe) throw UniverseMismatch();
    util::KahanSum s;
    for (std::size_t x = 0; x < f.size(); ++x) s.add(f.values[x] * g.values[x]);
    return s.value() / static_cast<double>(f.universe.n);
}

/// 1_X, as a bounded measure of mean exactly 1.
inline BoundedMeasure constant_one(Universe u) {
    return BoundedMeasure(u, std::vector<double>(static_cast<std::size_t>(u.n), 1.0));
}

struct SeminormWitness {
    double value = 0.0;
    std::size_t witness = 0;  // argmax member index, lowest index on ties
};

namespace detail {
/// max_{f in F} |<u_as_difference, f>| with deterministic lowest-index argmax.
/// Shared by family_seminorm and distinguishability so the two are equal by
/// construction, as the module invariants require.
inline SeminormWitness seminorm_scan(const std::vector<double>& diff, Universe u,
                                     const FunctionFamily& family) {
    if (family.universe != u) throw UniverseMismatch();
    SeminormWitness best;
    best.value = -1.0;
    for (std::size_t i = 0; i < family.size(); ++i) {
        util::KahanSum s;
        const auto& fv = family.members[i].values;
        for (std::size_t x = 0; x < diff.size(); ++x) s.add(diff[x] * fv[x]);
        double v = std::fabs(s.value() / static_cast<double>(u.n));
        if (v > best.value) {
            best.value = v;
            best.witness = i;
        }
    }
    return best;
}
}  // namespace detail

/// ||u||_F = max_{f in F} |<u, f>|  (a seminorm in u).
inline double family_seminorm(const PointFunction& u, const FunctionFamily& family) {
    return detail::seminorm_scan(u.values, u.universe, family).value;
}

/// Largest violation of ε-indistinguishability between g and h, with witness.
inline SeminormWitness distinguishability(const PointFunction& g, const PointFunction& h,
                                          const FunctionFamily& family) {
    if (g.universe != h.universe) throw UniverseMismatch();
    std::vector<double> diff(g.size());
    for (std::size_t x = 0; x < diff.size(); ++x) diff[x] = g.values[x] - h.values[x];
    return detail::seminorm_scan(diff, g.universe, family);
}

struct PseudorandomVerdict {
    bool pseudorandom = false;
    SeminormWitness worst;
};

/// ν is ε-pseudorandom iff ν and 1_X are ε-indistinguishable under F.
inline PseudorandomVerdict is_pseudorandom(const Measure& nu, const FunctionFamily& family,
                                           double eps) {
    if (eps <= 0.0) throw InvalidParameter("epsilon must be positive");
    PseudorandomVerdict v;
    v.worst = distinguishability(nu, constant_one(nu.universe), family);
    v.pseudorandom = v.worst.value <= eps;
    return v;
}

/// F' = F ∪ {-f : f in F}; originals first, then negations, no dedup.
/// With F' the absolute values in distinguishing statements can be dropped.
inline FunctionFamily signed_closure(const FunctionFamily& family) {
    std::vector<BoundedFunction> members;
    std::vector<std::string> labels;
    members.reserve(2 * family.size());
    labels.reserve(2 * family.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        members.push_back(family.members[i]);
        labels.push_back(family.labels[i] + "+");
    }
    for (std::size_t i = 0; i < family.size(); ++i) {
        std::vector<double> neg(family.members[i].values);
        for (double& v : neg) v = -v;
        members.emplace_back(family.universe, std::move(neg));
        labels.push_back(family.labels[i] + "-");
    }
    return FunctionFamily(family.universe, std::move(members), std::move(labels));
}

/// Pointwise product of bounded functions; [-1,1] is closed under products.
inline BoundedFunction product_function(const std::vector<BoundedFunction>& fs) {
    if (fs.empty()) throw InvalidParameter("product_function needs at least one factor");
    Universe u = fs.front().universe;
    std::vector<double> prod(fs.front().values);
    for (std::size_t i = 1; i < fs.size(); ++i) {
        if (fs[i].universe != u) throw UniverseMismatch();
        for (std::size_t x = 0; x < prod.size(); ++x) prod[x] *= fs[i].values[x];
    }
    return BoundedFunction(u, std::move(prod));
}

struct FamilyPowerVerdict {
    bool definitive = false;  // false: enumeration skipped (over budget)
    bool pseudorandom = false;
    double worst_value = 0.0;
    std::vector<std::size_t> worst_product;  // indices into F, length k' >= 1
};

/// Exhaustive pseudorandomness check of ν against F^k (all products of up to
/// k members of F), when the ordered-tuple count fits the budget. The
/// pipeline supplies specific witnesses instead, so enumeration is optional.
inline FamilyPowerVerdict family_power_check(const Measure& nu, const FunctionFamily& family,
                                             int k, double eps_prime, std::int64_t budget) {
    if (k < 1) throw InvalidParameter("k must be >= 1");
    if (nu.universe != family.universe) throw UniverseMismatch();

    // Σ_{k'<=k} |F|^{k'} with overflow saturation.
    long double total = 0.0L;
    long double pw = 1.0L;
    for (int kp = 1; kp <= k; ++kp) {
        pw *= static_cast<long double>(family.size());
        total += pw;
        if (total > 4.0e18L) break;
    }
    FamilyPowerVerdict verdict;
    if (total > static_cast<long double>(budget)) return verdict;  // Skipped

    const std::size_t n = nu.size();
    std::vector<double> diff(n);
    for (std::size_t x = 0; x < n; ++x) diff[x] = nu.values[x] - 1.0;

    std::vector<double> prod(n, 1.0);
    std::vector<std::size_t> stack;
    double worst = -1.0;
    std::vector<std::size_t> worst_prod;

    // Depth-first over ordered tuples in index order: the first strict
    // improvement wins, which makes ties lexicographic-lowest.
    auto dfs = [&](auto&& self, const std::vector<double>& cur) -> void {
        if (!stack.empty()) {
            util::KahanSum s;
            for (std::size_t x = 0; x < n; ++x) s.add(diff[x] * cur[x]);
            double v = std::fabs(s.value() / static_cast<double>(n));
            if (v > worst) {
                worst = v;
                worst_prod = stack;
            }
        }
        if (stack.size() == static_cast<std::size_t>(k)) return;
        for (std::size_t i = 0; i < family.size(); ++i) {
            std::vector<double> next(n);
            for (std::size_t x = 0; x < n; ++x) next[x] = cur[x] * family.members[i].values[x];
            stack.push_back(i);
            self(self, next);
            stack.pop_back();
        }
    };
    dfs(dfs, prod);

    verdict.definitive = true;
    verdict.worst_value = worst;
    verdict.worst_product = std::move(worst_prod);
    verdict.pseudorandom = worst <= eps_prime;
    return verdict;
}

}  // namespace densemodel
