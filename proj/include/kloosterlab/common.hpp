#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>

namespace kloosterlab {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using i128 = __int128;
using u128 = unsigned __int128;
using cplx = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Least nonnegative residue of a mod m.
inline i64 mod(i64 a, i64 m) {
    i64 r = a % m;
    return r < 0 ? r + m : r;
}

inline i64 mod(i128 a, i64 m) {
    i128 r = a % m;
    return static_cast<i64>(r < 0 ? r + m : r);
}

// e(num/den) = exp(2 pi i num/den), reducing the fraction first so that
// large numerators do not lose precision.
inline cplx e_frac(i64 num, i64 den) {
    i64 r = mod(num, den);
    // fold into (-1/2, 1/2] for a smaller angle
    double x = static_cast<double>(r) / static_cast<double>(den);
    if (x > 0.5) x -= 1.0;
    return std::polar(1.0, kTwoPi * x);
}

// e(x) for a real x, reduced modulo 1 first.
inline cplx e_real(double x) {
    double f = x - std::round(x);
    return std::polar(1.0, kTwoPi * f);
}

// The audit record: a computed left-hand side against a theorem's
// right-hand side with implied constant 1.
struct BoundReport {
    std::string family;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    std::map<std::string, double> params;

    static BoundReport make(std::string family, double lhs, double rhs) {
        BoundReport r;
        r.family = std::move(family);
        r.lhs = lhs;
        r.rhs = rhs;
        r.ratio = rhs > 0 ? lhs / rhs : (lhs == 0 ? 0.0 : INFINITY);
        return r;
    }
};

// The stand-in for an x^eps factor: (log x)^power, floored at 1.
inline double eps_proxy(double x, double power) {
    if (x <= std::exp(1.0)) return 1.0;
    return std::pow(std::log(x), power);
}

} // namespace kloosterlab
