#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "densemodel/core.hpp"
#include "densemodel/errors.hpp"
#include "densemodel/exact.hpp"
#include "densemodel/game.hpp"
#include "densemodel/threshold.hpp"
#include "densemodel/util.hpp"

namespace densemodel {

/// Polynomial approximation of the threshold indicator:
///   p(z) in [0,1] on [-1,1], p <= β on [-1, t-α], p >= 1-β on [t, 1].
///
/// Construction: p is the normalized integral of a nonnegative kernel
/// concentrated at z0 = t - α/2,
///   p(z) = (1/Z) ∫_{-1}^{z} [F_d(θ-θ0) + F_d(θ+θ0)]^q du,   u = cos θ,
/// where F_d is the Fejér kernel and θ0 = arccos(z0). The density is
/// nonnegative, so p is monotone with p(-1) = 0 and p(1) = 1 by
/// normalization; the two side conditions reduce to kernel tail mass and
/// need total degree Θ((1/α)·log(1/β)) instead of the Θ(log(1/β)/α²) a
/// binomial tail would require. Everything is verified on a dense grid
/// before a polynomial is returned.
struct StepPolynomial {
    double t = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    int degree = 0;                   // monomial degree d
    std::vector<double> cheb;         // Chebyshev coefficients, the evaluation form
    std::vector<long double> coeffs;  // monomial c_0..c_d, rounded mirrors of the exact values
    std::vector<exact::BigRat> coeffs_exact;
    double coeff_bound = 0.0;         // max_i |c_i|; +inf if it overflows double
    double log10_coeff_bound = 0.0;
    int kernel_d = 0;
    int kernel_q = 0;

    /// Clenshaw evaluation of the Chebyshev form; stable at any degree.
    double evaluate(double z) const {
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = cheb.size(); k-- > 1;) {
            double b0 = 2.0 * z * b1 - b2 + cheb[k];
            b2 = b1;
            b1 = b0;
        }
        return cheb[0] + z * b1 - b2;
    }
};

struct StepVerifyReport {
    bool pass = false;
    bool monotone = false;          // no grid decrease beyond 1e-12
    bool guaranteed = false;        // monotone + endpoint checks upgrade the grid evidence
    double worst_range_low = 0.0;   // max(0, -min p) over the grid
    double worst_range_high = 0.0;  // max(0, max p - 1)
    double worst_lower_condition = 0.0;  // max(0, p - β) on z <= t-α
    double worst_upper_condition = 0.0;  // max(0, (1-β) - p) on z >= t
    double worst_monotone_decrease = 0.0;
    double p_at_minus_one = 0.0;
    double p_at_one = 0.0;
    double p_at_t_minus_alpha = 0.0;
    double p_at_t = 0.0;
};

struct StepPolyOptions {
    int degree_cap = 4096;
    std::int64_t verify_grid = 100000;
    int max_attempts = 6;
};

namespace steppoly_detail {

inline double fejer(double phi, int d) {
    double s = std::sin(0.5 * phi);
    // limit value d^2 at the peak and its 2π-periodic images
    if (std::fabs(s) < 1e-9) return static_cast<double>(d) * static_cast<double>(d);
    double r = std::sin(0.5 * d * phi) / s;
    return r * r;
}

/// Relative kernel tail masses (mass at z > t, mass at z < t-α) computed by
/// quadrature in θ; used only to size (d, q), the grid verification is the gate.
inline std::pair<double, double> kernel_tails(int d, int q, double theta0, double theta_t,
                                              double theta_lo) {
    const int samples = std::max(2048, 8 * d);
    const double h = M_PI / samples;
    double total = 0.0, above = 0.0, below = 0.0;
    for (int i = 0; i <= samples; ++i) {
        double theta = i * h;
        double s = fejer(theta - theta0, d) + fejer(theta + theta0, d);
        double w = std::pow(s, q) * std::sin(theta);
        if (i == 0 || i == samples) w *= 0.5;
        total += w;
        if (theta < theta_t) above += w;
        if (theta > theta_lo) below += w;
    }
    if (total <= 0.0) return {1.0, 1.0};
    return {below / total, above / total};
}

/// Minimal (kernel degree d, power q) with both tails below the target,
/// minimizing the final polynomial degree (d-1)q + 1. Returns {0, 0} when
/// nothing fits under the cap.
inline std::pair<int, int> size_kernel(double theta0, double theta_t, double theta_lo,
                                       double tail_target, int degree_cap) {
    int best_d = 0, best_q = 0;
    long best_total = std::numeric_limits<long>::max();
    for (int q = 1; q <= 8; ++q) {
        long d_max = (static_cast<long>(degree_cap) - 1) / q + 1;
        if (d_max < 4) break;
        auto ok = [&](long d) {
            auto [lo, hi] = kernel_tails(static_cast<int>(d), q, theta0, theta_t, theta_lo);
            return lo <= tail_target && hi <= tail_target;
        };
        if (!ok(d_max)) continue;
        long lo = 4, hi = d_max;
        while (lo < hi) {
            long mid = lo + (hi - lo) / 2;
            if (ok(mid))
                hi = mid;
            else
                lo = mid + 1;
        }
        long total = (lo - 1) * q + 1;
        if (total < best_total) {
            best_total = total;
            best_d = static_cast<int>(lo);
            best_q = q;
        }
    }
    return {best_d, best_q};
}

/// Cosine-series product: cos(iθ)cos(jθ) = ½[cos((i+j)θ) + cos(|i-j|θ)].
inline std::vector<long double> cos_series_mul(const std::vector<long double>& a,
                                               const std::vector<long double>& b) {
    std::vector<long double> c(a.size() + b.size() - 1, 0.0L);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0L) continue;
        for (std::size_t j = 0; j < b.size(); ++j) {
            long double w = 0.5L * a[i] * b[j];
            c[i + j] += w;
            c[i >= j ? i - j : j - i] += w;
        }
    }
    return c;
}

/// Chebyshev coefficients of the normalized kernel integral.
inline std::vector<double> build_cheb(int d, int q, double z0) {
    // S(θ) = F_d(θ-θ0)+F_d(θ+θ0) = 2 + Σ_{k>=1} 4(1-k/d) cos(kθ0) cos(kθ);
    // cos(kθ0) = T_k(z0) by the Chebyshev recurrence.
    std::vector<long double> s(static_cast<std::size_t>(d), 0.0L);
    s[0] = 2.0L;
    long double ck_prev = 1.0L, ck = static_cast<long double>(z0);
    for (int k = 1; k < d; ++k) {
        s[static_cast<std::size_t>(k)] =
            4.0L * (1.0L - static_cast<long double>(k) / d) * ck;
        long double next = 2.0L * static_cast<long double>(z0) * ck - ck_prev;
        ck_prev = ck;
        ck = next;
    }
    std::vector<long double> kernel = s;
    for (int p = 1; p < q; ++p) kernel = cos_series_mul(kernel, s);

    // Integrate: ∫T_0 = T_1, ∫T_1 = T_2/4, ∫T_k = ½[T_{k+1}/(k+1) - T_{k-1}/(k-1)].
    std::vector<long double> b(kernel.size() + 1, 0.0L);
    b[1] += kernel[0];
    if (kernel.size() > 1) b[2] += kernel[1] / 4.0L;
    for (std::size_t k = 2; k < kernel.size(); ++k) {
        b[k + 1] += kernel[k] / (2.0L * static_cast<long double>(k + 1));
        b[k - 1] -= kernel[k] / (2.0L * static_cast<long double>(k - 1));
    }
    // fix the constant so P(-1) = 0, then normalize so P(1) = 1
    long double at_minus1 = 0.0L;
    for (std::size_t k = 1; k < b.size(); ++k) at_minus1 += (k % 2 == 0 ? b[k] : -b[k]);
    b[0] = -at_minus1;
    long double at_one = 0.0L;
    for (long double v : b) at_one += v;
    std::vector<double> out(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) out[k] = static_cast<double>(b[k] / at_one);
    return out;
}

struct MonomialExpansion {
    std::vector<exact::BigRat> exact;
    std::vector<long double> rounded;
    double bound_double = 0.0;
    double bound_log10 = 0.0;
};

/// Exact Chebyshev-to-monomial conversion over the dyadic values of the
/// stored double coefficients, using rolling integer rows of T_k.
inline MonomialExpansion expand_monomial(const std::vector<double>& cheb) {
    using exact::BigInt;
    using exact::BigRat;
    const std::size_t terms = cheb.size();

    // common dyadic denominator 2^E for all coefficients
    int min_p = 0;
    std::vector<std::int64_t> mant(terms, 0);
    std::vector<int> pow2(terms, 0);
    for (std::size_t k = 0; k < terms; ++k) {
        if (cheb[k] == 0.0) continue;
        int ex = 0;
        double fr = std::frexp(cheb[k], &ex);
        mant[k] = static_cast<std::int64_t>(std::ldexp(fr, 53));
        pow2[k] = ex - 53;
        min_p = std::min(min_p, pow2[k]);
    }
    const int E = -min_p;

    std::vector<BigInt> acc(terms, BigInt(0));
    std::vector<BigInt> t_prev{BigInt(1)};           // T_0
    std::vector<BigInt> t_cur{BigInt(0), BigInt(1)}; // T_1
    auto add_row = [&](std::size_t k, const std::vector<BigInt>& row) {
        if (mant[k] == 0) return;
        BigInt scaled = BigInt(mant[k]) << static_cast<unsigned>(pow2[k] + E);
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] != 0) acc[j] += scaled * row[j];
    };
    add_row(0, t_prev);
    if (terms > 1) add_row(1, t_cur);
    for (std::size_t k = 2; k < terms; ++k) {
        std::vector<BigInt> t_next(k + 1, BigInt(0));
        for (std::size_t j = 0; j + 1 <= k; ++j)
            if (t_cur[j] != 0) t_next[j + 1] = 2 * t_cur[j];
        for (std::size_t j = 0; j < t_prev.size(); ++j) t_next[j] -= t_prev[j];
        add_row(k, t_next);
        t_prev = std::move(t_cur);
        t_cur = std::move(t_next);
    }

    MonomialExpansion out;
    out.exact.reserve(terms);
    out.rounded.reserve(terms);
    BigRat den(BigInt(1) << static_cast<unsigned>(E));
    BigRat bound(0);
    for (std::size_t j = 0; j < terms; ++j) {
        BigRat c = BigRat(acc[j]) / den;
        out.rounded.push_back(exact::to_long_double(c));
        if (boost::multiprecision::abs(c) > bound) bound = boost::multiprecision::abs(c);
        out.exact.push_back(std::move(c));
    }
    out.bound_double = exact::to_double(bound);
    out.bound_log10 = bound == 0 ? -std::numeric_limits<double>::infinity()
                                 : exact::log10_abs(bound);
    return out;
}

}  // namespace steppoly_detail

/// Grid verification of the three range conditions plus monotonicity.
/// When the grid shows no decrease beyond 1e-12, the endpoint evaluations at
/// -1, 1, t-α and t upgrade the side conditions from grid evidence to interval
/// guarantees (a monotone function verified at interval endpoints is verified
/// on the interval).
inline StepVerifyReport verify_step_polynomial(const StepPolynomial& p, std::int64_t grid) {
    if (grid < 1000) throw InvalidParameter("verification grid must be >= 1000");
    StepVerifyReport rep;
    const std::size_t m = static_cast<std::size_t>(grid);
    const double lo_edge = p.t - p.alpha;

    struct Chunk {
        double min_p = std::numeric_limits<double>::infinity();
        double max_p = -std::numeric_limits<double>::infinity();
        // the claim's side conditions are two-sided: p in [0, β] left of the
        // transition, p in [1-β, 1] right of it
        double min_low = std::numeric_limits<double>::infinity();
        double max_low = -std::numeric_limits<double>::infinity();
        double min_high = std::numeric_limits<double>::infinity();
        double max_high = -std::numeric_limits<double>::infinity();
        double worst_decrease = 0.0;
    };
    std::size_t workers = util::effective_threads(m);
    std::vector<Chunk> chunks(workers);
    util::parallel_chunks(m, [&](std::size_t lo, std::size_t hi, std::size_t w) {
        Chunk c;
        double prev = 0.0;
        bool have_prev = false;
        std::size_t end = std::min(hi + 1, m);  // overlap one point for the cross-chunk pair
        for (std::size_t i = lo; i < end; ++i) {
            double z = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(m - 1);
            double v = p.evaluate(z);
            if (i < hi) {
                c.min_p = std::min(c.min_p, v);
                c.max_p = std::max(c.max_p, v);
                if (z <= lo_edge) {
                    c.min_low = std::min(c.min_low, v);
                    c.max_low = std::max(c.max_low, v);
                }
                if (z >= p.t) {
                    c.min_high = std::min(c.min_high, v);
                    c.max_high = std::max(c.max_high, v);
                }
            }
            if (have_prev) c.worst_decrease = std::max(c.worst_decrease, prev - v);
            prev = v;
            have_prev = true;
        }
        chunks[w] = c;
    });
    Chunk all;
    for (std::size_t w = 0; w < workers; ++w) {
        all.min_p = std::min(all.min_p, chunks[w].min_p);
        all.max_p = std::max(all.max_p, chunks[w].max_p);
        all.min_low = std::min(all.min_low, chunks[w].min_low);
        all.max_low = std::max(all.max_low, chunks[w].max_low);
        all.min_high = std::min(all.min_high, chunks[w].min_high);
        all.max_high = std::max(all.max_high, chunks[w].max_high);
        all.worst_decrease = std::max(all.worst_decrease, chunks[w].worst_decrease);
    }

    rep.p_at_minus_one = p.evaluate(-1.0);
    rep.p_at_one = p.evaluate(1.0);
    rep.p_at_t_minus_alpha = p.evaluate(lo_edge);
    rep.p_at_t = p.evaluate(p.t);
    all.min_low = std::min(all.min_low, rep.p_at_t_minus_alpha);
    all.max_low = std::max(all.max_low, rep.p_at_t_minus_alpha);
    all.min_high = std::min(all.min_high, rep.p_at_t);
    all.max_high = std::max(all.max_high, rep.p_at_t);

    rep.worst_range_low = std::max(0.0, -all.min_p);
    rep.worst_range_high = std::max(0.0, all.max_p - 1.0);
    rep.worst_lower_condition = std::max({0.0, all.max_low - p.beta, -all.min_low});
    rep.worst_upper_condition = std::max({0.0, (1.0 - p.beta) - all.min_high, all.max_high - 1.0});
    rep.worst_monotone_decrease = all.worst_decrease;
    rep.monotone = all.worst_decrease <= 1e-12;

    bool cond1 = rep.worst_range_low <= kTol && rep.worst_range_high <= kTol;
    bool cond2 = rep.worst_lower_condition <= kTol;
    bool cond3 = rep.worst_upper_condition <= kTol;
    rep.pass = cond1 && cond2 && cond3;
    rep.guaranteed = rep.pass && rep.monotone && rep.p_at_minus_one >= -kTol &&
                     rep.p_at_one <= 1.0 + kTol;
    return rep;
}

inline StepPolynomial build_step_polynomial(double t, double alpha, double beta,
                                            const StepPolyOptions& opts = {}) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidParameter("alpha must lie in (0,1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidParameter("beta must lie in (0,1]");
    if (t - alpha < -1.0 - kTol || t > 1.0 + kTol)
        throw InvalidParameter("threshold t = " + std::to_string(t) +
                               " outside [alpha-1, 1] for alpha = " + std::to_string(alpha));

    const double z0 = std::clamp(t - alpha / 2.0, -1.0 + 1e-12, 1.0 - 1e-12);
    const double theta0 = std::acos(z0);
    const double theta_t = std::acos(std::clamp(t, -1.0, 1.0));
    const double theta_lo = std::acos(std::clamp(t - alpha, -1.0, 1.0));

    double safety = 0.5;
    for (int attempt = 0; attempt < opts.max_attempts; ++attempt, safety *= 0.5) {
        auto [d, q] = steppoly_detail::size_kernel(theta0, theta_t, theta_lo, beta * safety,
                                                   opts.degree_cap);
        if (d == 0)
            throw DegreeCapExceeded("no kernel with tail mass <= " + std::to_string(beta * safety) +
                                    " fits degree cap " + std::to_string(opts.degree_cap));
        StepPolynomial p;
        p.t = t;
        p.alpha = alpha;
        p.beta = beta;
        p.kernel_d = d;
        p.kernel_q = q;
        p.cheb = steppoly_detail::build_cheb(d, q, z0);
        p.degree = static_cast<int>(p.cheb.size()) - 1;

        StepVerifyReport rep = verify_step_polynomial(p, opts.verify_grid);
        if (!rep.pass) continue;

        auto mono = steppoly_detail::expand_monomial(p.cheb);
        p.coeffs_exact = std::move(mono.exact);
        p.coeffs = std::move(mono.rounded);
        p.coeff_bound = mono.bound_double;
        p.log10_coeff_bound = mono.bound_log10;
        return p;
    }
    throw DegreeCapExceeded("grid verification kept failing within the degree cap " +
                            std::to_string(opts.degree_cap));
}

/// <ν - 1_X, p∘f̄> with the pointwise sandwich
///   f̄_t(x) - ε/12 <= p(f̄(x)) <= f̄_{t-ε/3}(x) + ε/12
/// asserted for every x. Requires p built with α = ε/3, β = ε/12.
inline double compose_and_separate(const StepPolynomial& p, const Mixture& fbar, const Measure& nu,
                                   double eps) {
    if (nu.universe != fbar.universe()) throw UniverseMismatch();
    if (std::fabs(p.alpha - eps / 3.0) > 1e-12 || std::fabs(p.beta - eps / 12.0) > 1e-12)
        throw InvalidParameter("polynomial was not built with alpha = eps/3, beta = eps/12");

    const std::size_t n = nu.size();
    util::KahanSum sep;
    for (std::size_t x = 0; x < n; ++x) {
        double z = fbar.values[x];
        double v = p.evaluate(z);
        double ft = z >= p.t ? 1.0 : 0.0;
        double fts = z >= p.t - eps / 3.0 ? 1.0 : 0.0;
        if (v < ft - eps / 12.0 - kTol || v > fts + eps / 12.0 + kTol)
            throw SandwichViolation("sandwich failed at x = " + std::to_string(x) + ": p(" +
                                    std::to_string(z) + ") = " + std::to_string(v));
        sep.add((nu.values[x] - 1.0) * v);
    }
    double separation = sep.value() / static_cast<double>(n);
    if (separation < eps / 6.0 - kTol)
        throw Error("separation " + std::to_string(separation) + " below eps/6 = " +
                    std::to_string(eps / 6.0));
    return separation;
}

}  // namespace densemodel
