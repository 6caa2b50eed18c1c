#include "kloosterlab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "kloosterlab/arith.hpp"

namespace kloosterlab {

namespace {

constexpr double kPi = std::numbers::pi;

using quad = __float128;

double series_j(int nu, double x) {
    const quad hx = static_cast<quad>(x) / 2;
    const quad hx2 = hx * hx;
    quad term = 1;
    for (int i = 1; i <= nu; ++i) term = term * hx / i;  // (x/2)^nu / nu!
    quad sum = term;
    for (int k = 1; k < 400; ++k) {
        term = -term * hx2 / (static_cast<quad>(k) * (nu + k));
        sum += term;
        quad at = term < 0 ? -term : term;
        quad as = sum < 0 ? -sum : sum;
        if (k > hx && at <= as * static_cast<quad>(1e-34)) break;
    }
    return static_cast<double>(sum);
}

// Hankel's expansion, nu in {0, 1}, x >= 30
double hankel_j(int nu, double x) {
    const double mu = 4.0 * nu * nu;
    double P = 0.0, Q = 0.0, a = 1.0, last = INFINITY;
    for (int k = 0; k < 200; ++k) {
        if (k > 0) a *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
        if (std::abs(a) > last) break;
        last = std::abs(a);
        const int sgn = (k / 2) % 2 == 0 ? 1 : -1;
        if (k % 2 == 0)
            P += sgn * a;
        else
            Q += sgn * a;
        if (last < 1e-18) break;
    }
    const double w = x - (0.5 * nu + 0.25) * kPi;
    return std::sqrt(2.0 / (kPi * x)) * (P * std::cos(w) - Q * std::sin(w));
}

// Bernoulli numbers B_2k / (2k (2k-1)) for Stirling's series
constexpr double kStirling[] = {1.0 / 12,          -1.0 / 360,       1.0 / 1260,       -1.0 / 1680,
                                1.0 / 1188,        -691.0 / 360360,  1.0 / 156,        -3617.0 / 122400};

double central_derivative(const RealFunction& g, double x, int order) {
    const double h = 1e-3;
    if (order == 0) return g(x);
    if (order == 1) return (-g(x + 2 * h) + 8 * g(x + h) - 8 * g(x - h) + g(x - 2 * h)) / (12 * h);
    if (order == 2)
        return (-g(x + 2 * h) + 16 * g(x + h) - 30 * g(x) + 16 * g(x - h) - g(x - 2 * h)) / (12 * h * h);
    throw std::invalid_argument("central_derivative: order above 2");
}

cplx i_power(int k) {
    switch (((k % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
    }
}

template <class F>
double integrate_unit_panels(F&& f, double y) {
    const int panels = 8 + 2 * static_cast<int>(std::ceil(std::sqrt(std::max(y, 0.0))));
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double a = 1.0 + double(i) / panels, b = 1.0 + double(i + 1) / panels;
        acc += boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
    }
    return acc;
}

} // namespace

cplx lgamma_complex(cplx z) {
    if (z.real() <= 0 && z.imag() == 0 && z.real() == std::round(z.real()))
        throw std::domain_error("lgamma_complex: pole");
    cplx shift = 0.0;
    while (z.real() < 15.0) {
        shift += std::log(z);
        z += 1.0;
    }
    const cplx zi = 1.0 / z, zi2 = zi * zi;
    cplx series = 0.0, pw = zi;
    for (double c : kStirling) {
        series += c * pw;
        pw *= zi2;
    }
    return (z - 0.5) * std::log(z) - z + 0.5 * std::log(kTwoPi) + series - shift;
}

double bessel_j(int nu, double x) {
    if (nu < 0 || nu > 60) throw std::invalid_argument("bessel_j: order must be in [0, 60]");
    if (x < 0) throw std::invalid_argument("bessel_j: x must be nonnegative");
    if (x == 0) return nu == 0 ? 1.0 : 0.0;
    if (x <= std::max(30.0, double(nu))) return series_j(nu, x);
    double jm = hankel_j(0, x), j = hankel_j(1, x);
    if (nu == 0) return jm;
    for (int n = 1; n < nu; ++n) {
        const double next = 2.0 * n / x * j - jm;
        jm = j;
        j = next;
    }
    return j;
}

// ---------------------------------------------------------------------------

namespace {

// (1/2 pi i) int_{(sigma)} G(s) x^{-s} ds / s^power, power in {0, 1}
double mellin_inverse(const WeightW& W, double x, double sigma, int power) {
    if (!(x > 0)) throw std::invalid_argument("weight_w: x must be positive");
    const double kmin = std::min(W.k1, W.k2) / 2.0;
    if ((power == 1 && sigma == 0.0) || sigma <= -kmin) throw std::invalid_argument("weight_w: bad abscissa");
    const cplx g0 = lgamma_complex(W.k1 / 2.0) + lgamma_complex(W.k2 / 2.0);
    const double lx = std::log(x), l2pi = std::log(kTwoPi);
    auto integrand = [&](double t) {
        const cplx s(sigma, t);
        const cplx v = std::exp(lgamma_complex(W.k1 / 2.0 + s) + lgamma_complex(W.k2 / 2.0 + s) - g0 -
                                2.0 * s * l2pi - s * lx);
        return (power == 1 ? v / s : v).real();
    };
    double T = W.T_mellin;
    const double scale = std::exp(-sigma * lx);
    while (std::abs(integrand(T)) > 1e-14 * std::max(1.0, scale) && T < 1e4) T *= 2;
    const double d = power == 1 ? std::min(std::abs(sigma), sigma + kmin) : sigma + kmin;
    const double h = std::min(0.25, d / 6.0);
    const int n = static_cast<int>(std::ceil(T / h));
    double acc = 0.5 * integrand(0.0);
    for (int j = 1; j <= n; ++j) acc += integrand(j * h);
    return acc * h / kPi;
}

double default_sigma(const WeightW& W, double x) {
    return x >= 1.0 ? W.sigma : -std::min(W.k1, W.k2) / 4.0;
}

} // namespace

double weight_w_contour(const WeightW& W, double x, double sigma) {
    double v = mellin_inverse(W, x, sigma, 1);
    if (sigma < 0) v += 1.0;
    return v;
}

double weight_w(const WeightW& W, double x) { return weight_w_contour(W, x, default_sigma(W, x)); }

double weight_w_log_derivative(const WeightW& W, double x) { return -mellin_inverse(W, x, default_sigma(W, x), 0); }

WeightTable::WeightTable(const WeightW& W, double x_min, double tol, int per_unit) : W_(W), h_(1.0 / per_unit) {
    if (!(x_min > 0) || !(tol > 0) || per_unit < 8) throw std::invalid_argument("WeightTable: bad parameters");
    u0_ = std::log(x_min) - h_;
    // walk up in steps of 1/4 in log x until |W| and |x W'| are both below tol
    double u = std::max(0.0, u0_);
    while (std::abs(weight_w(W, std::exp(u))) > tol || std::abs(weight_w_log_derivative(W, std::exp(u))) > tol) {
        u += 0.25;
        if (u > 12) throw std::runtime_error("WeightTable: W does not decay");
    }
    x_cut_ = std::exp(u);
    const auto n = static_cast<std::size_t>(std::ceil((u - u0_) / h_)) + 2;
    w_.resize(n);
    dw_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::exp(u0_ + h_ * static_cast<double>(i));
        w_[i] = weight_w(W, x);
        dw_[i] = weight_w_log_derivative(W, x);
    }
}

double WeightTable::operator()(double x) const {
    if (x >= x_cut_) return 0.0;
    const double t = (std::log(x) - u0_) / h_;
    if (t < 0) throw std::out_of_range("WeightTable: x below the table");
    const auto i = static_cast<std::size_t>(t);
    const double f = t - static_cast<double>(i);
    // cubic Hermite in u = log x
    const double h00 = (1 + 2 * f) * (1 - f) * (1 - f), h10 = f * (1 - f) * (1 - f);
    const double h01 = f * f * (3 - 2 * f), h11 = f * f * (f - 1);
    return h00 * w_[i] + h10 * h_ * dw_[i] + h01 * w_[i + 1] + h11 * h_ * dw_[i + 1];
}

// ---------------------------------------------------------------------------

double BumpFunction::operator()(double x) const {
    const double t = 2.0 * x - 3.0;
    if (t <= -1.0 || t >= 1.0) return 0.0;
    return std::exp(beta - beta / (1.0 - t * t));
}

cplx hankel_transform(const RealFunction& V, int k, double y) {
    if (k < 1) throw std::invalid_argument("hankel_transform: weight must be positive");
    if (y < 0) throw std::invalid_argument("hankel_transform: y must be nonnegative");
    const double sy = std::sqrt(y);
    auto f = [&](double x) { return V(x) * bessel_j(k - 1, 4.0 * kPi * std::sqrt(x) * sy); };
    const double integral = integrate_unit_panels(f, y);
    if (!std::isfinite(integral)) throw std::runtime_error("hankel_transform: quadrature failed");
    return kTwoPi * i_power(k) * integral;
}

cplx hankel_transform_by_parts(const RealFunction& V, int k, double y, int parts) {
    if (parts < 0 || parts > 2) throw std::invalid_argument("hankel_transform_by_parts: parts in [0, 2]");
    if (!(y > 0)) throw std::invalid_argument("hankel_transform_by_parts: y must be positive");
    const double sy = std::sqrt(y);
    const double e = (k - 1) / 2.0;
    RealFunction g = [&](double x) { return x > 0 ? V(x) * std::pow(x, -e) : 0.0; };
    auto f = [&](double x) {
        return central_derivative(g, x, parts) * std::pow(x, e + parts / 2.0) *
               bessel_j(k - 1 + parts, 4.0 * kPi * std::sqrt(x) * sy);
    };
    const double integral = integrate_unit_panels(f, y) * std::pow(-1.0 / (kTwoPi * sy), parts);
    return kTwoPi * i_power(k) * integral;
}

VoronoiResult voronoi_residual(const Newform& f, i64 b, u64 c, const RealFunction& V, double N) {
    if (c == 0 || c > 10) throw std::invalid_argument("voronoi_residual: needs 1 <= c <= 10");
    if (!(N > 0) || N > 50) throw std::invalid_argument("voronoi_residual: needs 0 < N <= 50");
    if (gcd_signed(b, static_cast<i64>(c)) != 1) throw std::invalid_argument("voronoi_residual: needs (b, c) = 1");
    const i64 C = static_cast<i64>(c);
    const i64 bbar = c == 1 ? 0 : static_cast<i64>(mod_inverse(b, c));
    VoronoiResult out;
    for (u64 n = static_cast<u64>(std::ceil(N)); n <= static_cast<u64>(std::floor(2 * N)); ++n) {
        if (n == 0) continue;
        if (n > f.n_max) throw std::out_of_range("voronoi_residual: coefficient table too short");
        out.lhs += f.lam(n) * e_frac(static_cast<i64>((static_cast<u128>(mod(b, C)) * n) % c), C) * V(double(n) / N);
    }
    const double scale = N / double(c * c);
    double run = 0.0;  // largest |term| in the current block
    u64 block_start = 1;
    for (u64 n = 1;; ++n) {
        if (n > f.n_max) throw std::out_of_range("voronoi_residual: coefficient table too short for the dual sum");
        const cplx h = hankel_transform(V, f.weight, double(n) * scale);
        out.rhs += f.lam(n) * e_frac(-static_cast<i64>((static_cast<u128>(bbar) * n) % c), C) * h;
        run = std::max(run, std::abs(h));
        out.terms_rhs = n;
        // stop once a whole block, as long as 1/5 of the range so far, is negligible
        if (n - block_start + 1 >= std::max<u64>(20, block_start / 5)) {
            if (run < 1e-10) break;
            block_start = n + 1;
            run = 0.0;
        }
    }
    out.rhs *= N / double(c);
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

// ---------------------------------------------------------------------------

CircleApprox CircleApprox::uniform(u64 Q, double delta) {
    CircleApprox ca;
    ca.Q = double(Q);
    ca.delta = delta;
    for (u64 c = Q; c <= 2 * Q; ++c) ca.w.emplace_back(c, 1.0);
    return ca;
}

JutilaResult jutila_approximation(const CircleApprox& ca, double eps_power) {
    const double Q = ca.Q, delta = ca.delta;
    if (!(Q >= 1)) throw std::invalid_argument("jutila_approximation: needs Q >= 1");
    if (delta < 1.0 / (Q * Q) * (1 - 1e-12) || delta > 1.0 / Q * (1 + 1e-12))
        throw std::invalid_argument("jutila_approximation: needs Q^-2 <= delta <= Q^-1");
    JutilaResult out;
    for (auto [c, w] : ca.w) {
        if (w < 0 || w > 1) throw std::invalid_argument("jutila_approximation: weights must lie in [0, 1]");
        if (double(c) < Q || double(c) > 2 * Q) throw std::invalid_argument("jutila_approximation: c outside [Q, 2Q]");
        out.Lambda += w * double(euler_phi(c));
    }
    if (!(out.Lambda > 0)) throw std::invalid_argument("jutila_approximation: Lambda = 0");

    // events (position, height change) on [0, 1)
    std::vector<std::pair<double, double>> ev;
    auto add = [&](double a, double b, double hgt) {
        ev.emplace_back(a, hgt);
        ev.emplace_back(b, -hgt);
    };
    for (auto [c, w] : ca.w) {
        if (w == 0) continue;
        const double hgt = w / (2 * delta * out.Lambda);
        for (u64 d = 0; d < c; ++d) {
            if (gcd(d, c) != 1) continue;
            double lo = double(d) / double(c) - delta, hi = double(d) / double(c) + delta;
            lo -= std::floor(lo);
            hi -= std::floor(hi);
            if (2 * delta >= 1.0) {
                // the interval covers the circle at least once
                const double cover = std::floor(2 * delta);
                add(0.0, 1.0, hgt * cover);
                const double rest = 2 * delta - cover;
                if (rest == 0) continue;
                hi = lo + rest;
                if (hi >= 1.0) hi -= 1.0;
            }
            if (lo <= hi) {
                add(lo, hi, hgt);
            } else {
                add(lo, 1.0, hgt);
                add(0.0, hi, hgt);
            }
        }
    }
    std::sort(ev.begin(), ev.end());
    double level = 0.0, pos = 0.0;
    for (auto [x, dh] : ev) {
        const double len = x - pos;
        if (len > 0) {
            out.mass += level * len;
            out.l2_error += (1 - level) * (1 - level) * len;
        }
        pos = x;
        level += dh;
    }
    out.l2_error += (1 - level) * (1 - level) * (1.0 - pos);
    out.mass += level * (1.0 - pos);
    out.bound = Q * Q * eps_proxy(Q, eps_power) / (delta * out.Lambda * out.Lambda);
    return out;
}

} // namespace kloosterlab
