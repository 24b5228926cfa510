#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "densemodel/errors.hpp"

namespace densemodel::exact {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;
using BigFloat = boost::multiprecision::cpp_bin_float_100;

/// Exact dyadic value of a finite double.
inline BigRat of_double(double x) {
    if (!std::isfinite(x)) throw InvalidParameter("cannot convert non-finite double exactly");
    if (x == 0.0) return BigRat(0);
    int ex = 0;
    double fr = std::frexp(x, &ex);               // x = fr * 2^ex, |fr| in [0.5, 1)
    auto mant = static_cast<std::int64_t>(std::ldexp(fr, 53));  // exact: doubles have 53-bit significands
    int shift = ex - 53;
    BigRat r(mant);
    if (shift >= 0)
        r *= BigRat(BigInt(1) << shift);
    else
        r /= BigRat(BigInt(1) << (-shift));
    return r;
}

inline double to_double(const BigRat& r) { return r.template convert_to<double>(); }
inline long double to_long_double(const BigRat& r) { return r.template convert_to<long double>(); }

/// Dyadic fixed-point value num * 2^exp2. Products of doubles and their sums
/// are exactly representable, and unlike cpp_rational there is no gcd
/// normalization per operation, so long product chains stay cheap.
struct Dyadic {
    BigInt num;
    long exp2 = 0;

    static Dyadic from_double(double x) {
        Dyadic d;
        if (!std::isfinite(x)) throw InvalidParameter("cannot convert non-finite double exactly");
        if (x == 0.0) return d;
        int ex = 0;
        double fr = std::frexp(x, &ex);
        d.num = static_cast<std::int64_t>(std::ldexp(fr, 53));
        d.exp2 = ex - 53;
        return d;
    }

    static Dyadic from_int(std::int64_t v) {
        Dyadic d;
        d.num = v;
        return d;
    }

    Dyadic& operator*=(const Dyadic& o) {
        num *= o.num;
        exp2 += o.exp2;
        return *this;
    }

    Dyadic& operator+=(const Dyadic& o) {
        if (o.num == 0) return *this;
        if (num == 0) {
            *this = o;
            return *this;
        }
        long e = std::min(exp2, o.exp2);
        num <<= static_cast<unsigned>(exp2 - e);
        num += o.num << static_cast<unsigned>(o.exp2 - e);
        exp2 = e;
        return *this;
    }

    Dyadic& operator-=(const Dyadic& o) {
        Dyadic neg = o;
        neg.num = -neg.num;
        return *this += neg;
    }

    BigRat to_rational() const {
        BigRat r(num);
        if (exp2 >= 0)
            r *= BigRat(BigInt(1) << static_cast<unsigned>(exp2));
        else
            r /= BigRat(BigInt(1) << static_cast<unsigned>(-exp2));
        return r;
    }
};

/// Exact <a, b> = (1/n) Σ a_x b_x over the dyadic values of the doubles.
inline BigRat inner_exact(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidParameter("inner_exact: length mismatch");
    BigRat s(0);
    for (std::size_t x = 0; x < a.size(); ++x) s += of_double(a[x]) * of_double(b[x]);
    return s / BigRat(static_cast<std::int64_t>(a.size()));
}

inline BigRat mean_exact(const std::vector<double>& a) {
    BigRat s(0);
    for (double v : a) s += of_double(v);
    return s / BigRat(static_cast<std::int64_t>(a.size()));
}

/// log10 of |r|, -inf for zero; used to report quantities that underflow double.
inline double log10_abs(const BigRat& r) {
    if (r == 0) return -std::numeric_limits<double>::infinity();
    BigInt num = boost::multiprecision::abs(boost::multiprecision::numerator(r));
    BigInt den = boost::multiprecision::denominator(r);
    // msb position refined by the leading 64 bits of each side
    auto lead = [](const BigInt& v) {
        unsigned msbi = boost::multiprecision::msb(v);
        BigInt top = msbi >= 63 ? BigInt(v >> (msbi - 63)) : v;
        return std::log2(top.template convert_to<double>()) + (msbi >= 63 ? msbi - 63 : 0);
    };
    return (lead(num) - lead(den)) * 0.30102999566398119521;
}

}  // namespace densemodel::exact
