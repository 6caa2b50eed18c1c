#include <cmath>

#include <boost/math/special_functions/bessel.hpp>

#include "doctest.h"
#include "kloosterlab/analytic.hpp"
#include "kloosterlab/arith.hpp"

using namespace kloosterlab;

TEST_CASE("complex log gamma") {
    for (double x : {0.3, 1.0, 2.5, 6.0, 13.0, 40.0})
        CHECK(lgamma_complex(x).real() == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
    // |Gamma(1/2 + it)|^2 = pi / cosh(pi t)
    for (double t : {0.5, 3.0, 20.0}) {
        double lhs = 2 * lgamma_complex(cplx(0.5, t)).real();
        CHECK(lhs == doctest::Approx(std::log(std::numbers::pi / std::cosh(std::numbers::pi * t))).epsilon(1e-12));
    }
    // Gamma(z+1) = z Gamma(z)
    cplx z(2.3, -7.1);
    CHECK(std::abs(std::exp(lgamma_complex(z + 1.0) - lgamma_complex(z)) - z) < 1e-12 * std::abs(z));
}

TEST_CASE("Bessel J against an independent implementation") {
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(3, 0.0) == 0.0);
    double worst_small = 0, worst_large = 0;
    for (int nu = 0; nu <= 30; ++nu)
        for (double x = 0.01; x < 5000; x *= 1.05) {
            const double want = boost::math::cyl_bessel_j(nu, x);
            if (std::abs(want) < 1e-250) continue;
            const double err = std::abs(bessel_j(nu, x) - want);
            // relative where the function is not near a zero
            const double scale = x <= 30 ? std::abs(want) : std::max(std::abs(want), 1.0 / std::sqrt(x));
            (x <= 30 ? worst_small : worst_large) = std::max(x <= 30 ? worst_small : worst_large, err / scale);
        }
    CHECK(worst_small < 1e-10);
    CHECK(worst_large < 1e-8);
}

TEST_CASE("J_11(1) against the alternating series with its remainder") {
    // terms t_k = (-1)^k (1/2)^{2k+11} / (k! (k+11)!), remainder below the first omitted term
    long double s = 0, term = 1;
    for (int i = 1; i <= 11; ++i) term *= 0.5L / i;
    long double first_omitted = 0;
    for (int k = 0; k < 6; ++k) {
        s += term;
        term = -term * 0.25L / ((k + 1) * (k + 12));
        first_omitted = std::abs(term);
    }
    const double v = bessel_j(11, 1.0);
    CHECK(v > 0);
    CHECK(std::abs(v - double(s)) <= double(first_omitted) + 1e-30);
    CHECK(v == doctest::Approx(double(s)).epsilon(1e-12));
}

TEST_CASE("Bessel recurrence and the large-argument bound") {
    for (int nu = 1; nu < 40; ++nu)
        for (double x = 0.5; x < 3000; x *= 1.3) {
            const double lhs = bessel_j(nu - 1, x) + bessel_j(nu + 1, x);
            const double rhs = 2.0 * nu / x * bessel_j(nu, x);
            CHECK(std::abs(lhs - rhs) < 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
        }
    double worst = 0;
    for (int k = 1; k <= 20; ++k)
        for (double x = 100.0 * k; x <= 1e4; x *= 1.01) worst = std::max(worst, std::abs(bessel_j(k - 1, x)) * std::sqrt(x));
    CHECK(worst <= 1.0);
}

TEST_CASE("approximate functional equation weight") {
    WeightW W;
    CHECK(std::abs(weight_w(W, 1e-6) - 1.0) < 1e-4);
    CHECK(std::abs(weight_w(W, 100.0)) < 1e-8);
    double prev = 1.0;
    for (double x = 1e-3; x < 50; x *= 1.2) {
        const double w = weight_w(W, x);
        CHECK(w <= prev + 1e-12);
        prev = w;
        for (int A = 0; A <= 5; ++A) CHECK(std::abs(w) <= 1e3 * std::pow(1 + x, -A) + 1e-12);
    }
    WeightW asym{12, 16};
    for (double x : {0.3, 1.0, 2.0, 5.0, 10.0}) {
        CHECK(std::abs(weight_w_contour(asym, x, 1.0) - weight_w_contour(asym, x, 2.0)) < 1e-8);
        CHECK(std::abs(weight_w_contour(asym, x, -3.0) - weight_w_contour(asym, x, 2.0)) < 1e-8);
    }
    // doubling the starting height changes nothing
    WeightW tall = W;
    tall.T_mellin = 80;
    CHECK(std::abs(weight_w(tall, 3.0) - weight_w(W, 3.0)) < 1e-12);
}

TEST_CASE("tabulated weight and its log-derivative") {
    for (int k2 : {12, 16, 24}) {
        WeightW W{12, k2};
        WeightTable tab(W, 1e-6, 1e-12);
        CHECK(std::abs(weight_w(W, tab.x_cut())) < 1e-12);
        double worst = 0, worst_d = 0;
        for (double x = 1.3e-6; x < tab.x_cut(); x *= 1.0713) {
            worst = std::max(worst, std::abs(tab(x) - weight_w(W, x)));
            // x W'(x) = -(2 / Gamma(a) Gamma(b)) y^{(a+b)/2} K_{a-b}(2 sqrt y), y = 4 pi^2 x
            const double a = W.k1 / 2.0, b = W.k2 / 2.0, y = 4 * std::numbers::pi * std::numbers::pi * x;
            const double want = -2 / (std::tgamma(a) * std::tgamma(b)) * std::pow(y, (a + b) / 2) *
                                boost::math::cyl_bessel_k(a - b, 2 * std::sqrt(y));
            worst_d = std::max(worst_d, std::abs(want - weight_w_log_derivative(W, x)));
        }
        CHECK(worst < 1e-10);
        CHECK(worst_d < 1e-12);
        CHECK(tab(2 * tab.x_cut()) == 0.0);
        CHECK_THROWS_AS(tab(1e-9), std::out_of_range);
    }
}

TEST_CASE("Hankel transform") {
    BumpFunction V;
    CHECK(V(1.0) == 0.0);
    CHECK(V(2.0) == 0.0);
    CHECK(V(1.5) == doctest::Approx(1.0));
    // small y: J_{k-1} is tiny, the transform is dominated by the first series term
    const double y0 = 1e-4;
    const double lead = std::pow(2 * std::numbers::pi * std::sqrt(y0), 11) / 39916800.0;  // (z/2)^11/11!, z = 4 pi sqrt(y)
    double moment = 0;
    for (int i = 0; i < 2000; ++i) {
        double x = 1.0 + (i + 0.5) / 2000;
        moment += V(x) * std::pow(x, 5.5) / 2000;
    }
    CHECK(hankel_transform(V, 12, y0).real() == doctest::Approx(kTwoPi * lead * moment).epsilon(1e-4));
    CHECK(std::abs(hankel_transform(V, 12, 1e4)) < 1e-6);
    for (double y : {3.0, 40.0, 500.0}) {
        cplx direct = hankel_transform(V, 12, y);
        CHECK(std::abs(direct - hankel_transform_by_parts(V, 12, y, 1)) < 1e-7);
        CHECK(std::abs(direct - hankel_transform_by_parts(V, 12, y, 2)) < 1e-7);
    }
    // weight 14 has i^k = -1
    CHECK(hankel_transform(V, 14, 3.0).real() * hankel_transform(V, 14, 3.0).real() > 0);
    CHECK(std::abs(hankel_transform(V, 14, 3.0).imag()) == 0.0);
}

TEST_CASE("Voronoi summation") {
    BumpFunction V;
    auto delta = compute_coefficients(12, 20000);
    auto f16 = compute_coefficients(16, 20000);
    CHECK(voronoi_residual(delta, 0, 1, V, 10).residual < 1e-5);
    CHECK(voronoi_residual(delta, 1, 3, V, 10).residual < 1e-5);
    auto zero = voronoi_residual(delta, 1, 3, [](double) { return 0.0; }, 10);
    CHECK(zero.residual == 0.0);
    double worst = 0;
    for (const Newform* f : {&delta, &f16})
        for (u64 c = 1; c <= 5; ++c)
            for (double N : {4.0, 12.5, 20.0})
                for (i64 b = 1; b < static_cast<i64>(c) + (c == 1); ++b) {
                    if (gcd_signed(b, static_cast<i64>(c)) != 1) continue;
                    worst = std::max(worst, voronoi_residual(*f, b, c, V, N).residual);
                }
    CHECK(worst < 1e-5);
    CHECK_THROWS_AS(voronoi_residual(delta, 2, 4, V, 10), std::invalid_argument);
    CHECK_THROWS_AS(voronoi_residual(compute_coefficients(12, 50), 1, 3, V, 10), std::out_of_range);
}

TEST_CASE("circle-method approximation") {
    CircleApprox one;
    one.Q = 7;
    one.delta = 1.0 / 20;
    one.w = {{7, 1.0}};
    auto r1 = jutila_approximation(one);
    CHECK(r1.Lambda == 6.0);
    CHECK(r1.mass == doctest::Approx(1.0).epsilon(1e-13));

    auto r = jutila_approximation(CircleApprox::uniform(50, 1.0 / 300));
    CHECK(r.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.l2_error <= r.bound);
    auto coarse = jutila_approximation(CircleApprox::uniform(50, 1.0 / 50));
    CHECK(coarse.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(coarse.l2_error <= coarse.bound);

    CircleApprox empty = CircleApprox::uniform(50, 1.0 / 300);
    for (auto& [c, w] : empty.w) w = 0;
    CHECK_THROWS_AS(jutila_approximation(empty), std::invalid_argument);
    CHECK_THROWS_AS(jutila_approximation(CircleApprox::uniform(50, 0.5)), std::invalid_argument);
}
