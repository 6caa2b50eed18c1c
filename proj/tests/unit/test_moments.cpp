#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

#include <boost/math/special_functions/digamma.hpp>

#include "doctest.h"
#include "kloosterlab/moments.hpp"
#include "kloosterlab/parallel.hpp"

using namespace kloosterlab;

namespace {

const Newform& delta() {
    static auto f = newform(12, 1'000'000);
    return *f;
}
const Newform& f16() {
    static auto f = newform(16, 1'000'000);
    return *f;
}
const WeightTable& table(int k2 = 12) {
    static WeightTable t12(WeightW{12, 12}, 1e-7, 1e-11);
    static WeightTable t16(WeightW{12, 16}, 1e-7, 1e-11);
    return k2 == 12 ? t12 : t16;
}
const MomentConstants& constants(int k2 = 12) {
    static auto c12 = moment_constants(delta(), delta());
    static auto c16 = moment_constants(delta(), f16());
    return k2 == 12 ? c12 : c16;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

TEST_CASE("Euler factors at the primes of q") {
    const auto& f = delta();
    auto one = local_factors(f, f, 1);
    CHECK(one.P1 == 1.0);
    CHECK(one.Q1 == 1.0);
    CHECK(one.logderiv_P == 0.0);
    for (u64 p : {2, 5, 13}) {
        const double l2 = f.lam(p * p), dp = double(p);
        const double want = (1 - l2 / dp + l2 / (dp * dp) - 1 / (dp * dp * dp)) / (1 - 1 / (dp * dp));
        CHECK(local_factors(f, f, p).P1 == doctest::Approx(want).epsilon(1e-14));
    }
    auto a = local_factors(f, f16(), 5), b = local_factors(f, f16(), 25);
    CHECK(a.P1 == b.P1);
    CHECK(a.Q1 == b.Q1);
    // log-derivatives against a central difference of the complex-s products
    for (u64 q : {6, 35, 101}) {
        const double h = 1e-5;
        auto lf = local_factors(f, f16(), q);
        auto up = local_factors(f, f16(), q, 1.0 + h), dn = local_factors(f, f16(), q, 1.0 - h);
        CHECK(lf.P.real() == doctest::Approx(lf.P1).epsilon(1e-14));
        CHECK(lf.logderiv_P == doctest::Approx((up.P - dn.P).real() / (2 * h) / lf.P1).epsilon(1e-8));
        CHECK(lf.logderiv_Q == doctest::Approx((up.Q - dn.Q).real() / (2 * h) / lf.Q1).epsilon(1e-8));
    }
}

TEST_CASE("symmetric square and Rankin-Selberg coefficients") {
    const auto& f = delta();
    const auto& g = f16();
    auto S = sym2_lfunction(f, 1000);
    auto R = rankin_lfunction(f, g, 1000);
    // L(s, sym^2 f) = zeta(2s) sum lambda(n^2) n^-s and L(s, f x g) = zeta(2s) sum lambda_f lambda_g(n) n^-s
    for (u64 n = 1; n <= 1000; ++n) {
        double s = 0, r = 0;
        for (u64 d = 1; d * d <= n; ++d) {
            if (n % (d * d)) continue;
            const u64 m = n / (d * d);
            s += f.lam(m * m);
            r += f.lam(m) * g.lam(m);
        }
        CHECK(S.a[n] == doctest::Approx(s).epsilon(1e-9).scale(1.0));
        CHECK(R.a[n] == doctest::Approx(r).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("L(1, sym^2 f) and L(1, f x g)") {
    const auto& f = delta();
    const auto& g = f16();
    // two smoothing kernels
    auto a = sym2_l_value(f, 8.0), b = sym2_l_value(f, 4.0);
    CHECK(a.value > 0);
    CHECK(std::abs(a.value - b.value) < 1e-10);
    CHECK(std::abs(a.logderiv - b.logderiv) < 1e-7);
    auto r1 = rankin_l_value(f, g, 8.0), r2 = rankin_l_value(f, g, 4.0);
    CHECK(r1.value > 0);
    CHECK(std::abs(r1.value - r2.value) < 1e-10);
    CHECK(std::abs(r1.logderiv - r2.logderiv) < 1e-7);
    CHECK_THROWS_AS(rankin_l_value(f, f), std::invalid_argument);
    // at s = 2 the Dirichlet series converge absolutely
    const double zeta4 = std::pow(std::numbers::pi, 4) / 90;
    auto R = rankin_lfunction(f, g, 200'000);
    double direct = 0;
    for (u64 n = 1; n <= 200'000; ++n) direct += f.lam(n) * g.lam(n) / (double(n) * n);
    CHECK(afe_evaluate(R, 2.0).real() == doctest::Approx(direct * zeta4).epsilon(1e-8));
    auto S = sym2_lfunction(f, 200'000);
    double sdirect = 0;
    for (u64 n = 1; n <= 200'000; ++n) sdirect += S.a[n] / (double(n) * n);
    CHECK(afe_evaluate(S, 2.0).real() == doctest::Approx(sdirect).epsilon(1e-5));
    // another weight
    auto S16 = sym2_l_value(g, 8.0), S16b = sym2_l_value(g, 4.0);
    CHECK(std::abs(S16.value - S16b.value) < 1e-10);
}

TEST_CASE("the constant c") {
    // zeta'(2) = -sum log n / n^2 by Euler-Maclaurin past N
    const double N = 1e6;
    double zp = 0;
    for (double n = 1; n <= N; ++n) zp -= std::log(n) / (n * n);
    zp -= (std::log(N) + 1) / N - 0.5 * std::log(N) / (N * N);
    const double zeta2 = std::numbers::pi * std::numbers::pi / 6;
    const double fixed = std::numbers::egamma - 0.5 * std::log(2 * std::numbers::pi) - 2 * zp / zeta2;
    CHECK(zp / zeta2 == doctest::Approx(-0.569961).epsilon(1e-5));
    const auto& f = delta();
    auto L = sym2_l_value(f);
    const double c = constant_c(f, L);
    CHECK(c == doctest::Approx(fixed + boost::math::digamma(6.0) + L.logderiv).epsilon(1e-9));
    CHECK(boost::math::digamma(6.0) == doctest::Approx(1 + 0.5 + 1.0 / 3 + 0.25 + 0.2 - std::numbers::egamma));
    CHECK(constant_c_derived(f, L) == doctest::Approx(c - 0.5 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("central products against the individual L-values") {
    const auto& f = delta();
    const auto& W = table();
    for (u64 q : {5, 7, 13, 16, 21}) {
        auto chars = CharacterGroup::create(q)->primitive_characters();
        for (std::size_t i = 0; i < chars.size(); ++i) {
            const auto& chi = chars[i];
            const double cp = central_product(f, f, chi, W);
            CHECK(std::norm(twisted_central_value(f, chi)) == doctest::Approx(cp).epsilon(1e-9).scale(1.0));
            CHECK(central_product(f, f, chi.conj(), W) == doctest::Approx(cp).epsilon(1e-12).scale(1.0));
        }
    }
    // f1 != f2: L(1/2, f x chi) conj L(1/2, g x chi)
    const auto& g = f16();
    for (auto& chi : CharacterGroup::create(7)->primitive_characters()) {
        const cplx want = twisted_central_value(f, chi) * std::conj(twisted_central_value(g, chi));
        CHECK(std::abs(want.imag()) < 1e-9);
        CHECK(central_product(f, g, chi, table(16)) == doctest::Approx(want.real()).epsilon(1e-9).scale(1.0));
    }
    // a tighter cut changes nothing at the 1e-6 level
    WeightTable tight(WeightW{12, 12}, 1e-5, 1e-14);
    auto chi = CharacterGroup::create(5)->primitive_characters().front();
    CHECK(std::abs(central_product(f, f, chi, tight) - central_product(f, f, chi, W)) < 1e-6);
    // rejected inputs
    auto group = CharacterGroup::create(9);
    CHECK_THROWS_AS(central_product(f, f, group->characters().front(), W), std::invalid_argument);
    auto f18 = newform(18, 1000);
    CHECK_THROWS_AS(central_product(f, *f18, chi, W), std::invalid_argument);
}

TEST_CASE("moment by folding over residue classes") {
    const auto& f = delta();
    const auto& W = table();
    for (u64 q : {1, 4, 5, 12, 13, 25, 45, 60}) {
        auto mt = main_term_params(f, f, q, constants());
        MomentOptions opt;
        opt.naive_check = true;
        opt.keep_per_character = true;
        auto r = moment_experiment(f, f, q, W, mt, opt);
        CHECK(r.psi == psi_count(q));
        CHECK(r.per_character.size() == r.psi);
        CHECK(r.naive_residual < 1e-10);
        CHECK(r.orthogonality_residual < 1e-12);
        CHECK(r.imag_residue < 1e-12);
        if (q == 4 || q == 1) CHECK(r.empirical == r.per_character.front());
        if (q == 1) {
            // the trivial character: L(1/2, Delta)^2
            auto chi = CharacterGroup::create(1)->primitive_characters().front();
            CHECK(r.empirical == doctest::Approx(std::norm(twisted_central_value(f, chi))).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(moment_experiment(f, f, 6, W, main_term_params(f, f, 6, constants())), std::invalid_argument);
    CHECK_THROWS_AS(moment_experiment(f, f, 701, W, main_term_params(f, f, 701, constants())), std::invalid_argument);
}

TEST_CASE("moment at q = 101: independent evaluation, determinism, main term window") {
    const auto& f = delta();
    const u64 q = 101;
    auto mt = main_term_params(f, f, q, constants());
    MomentOptions opt;
    opt.keep_per_character = true;
    setenv("KLOOSTERLAB_WORKERS", "1", 1);
    auto a = moment_experiment(f, f, q, table(), mt, opt);
    setenv("KLOOSTERLAB_WORKERS", "3", 1);
    auto b = moment_experiment(f, f, q, table(), mt, opt);
    unsetenv("KLOOSTERLAB_WORKERS");
    CHECK(a.empirical == b.empirical);
    CHECK(a.per_character == b.per_character);
    double direct = 0;
    for (auto& chi : CharacterGroup::create(q)->primitive_characters()) direct += std::norm(twisted_central_value(f, chi));
    CHECK(a.empirical == doctest::Approx(direct).epsilon(1e-9));
    // reordering the character sum
    auto v = a.per_character;
    std::mt19937_64 rng(7);
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(std::abs(pairwise_sum(v) - a.empirical) < 1e-9 * a.empirical);
    CHECK(a.ratio > 0.5);
    CHECK(a.ratio < 1.5);
}

TEST_CASE("diagonal term against its closed form") {
    const auto& f = delta();
    auto d101 = diagonal_term(f, f, 101, table(), constants());
    CHECK(d101.deviation < 0.05);
    CHECK(d101.psi == 99);
    // batch medians over two dyadic ranges of primes
    std::vector<double> lo, hi;
    for (u64 q : {101, 103, 107, 109, 113}) lo.push_back(diagonal_term(f, f, q, table(), constants()).deviation);
    for (u64 q : {401, 409, 419, 421, 431}) hi.push_back(diagonal_term(f, f, q, table(), constants()).deviation);
    CHECK(median(hi) < median(lo));
    // f1 != f2: no log q term, and the closed form is the same in both readings
    auto dg = diagonal_term(f, f16(), 211, table(16), constants(16));
    CHECK(dg.closed_form == dg.closed_form_printed);
    CHECK(dg.deviation < 0.05);
    auto mt = main_term_params(f, f16(), 211, constants(16));
    CHECK(main_term_M(mt, 211) == mt.Q1 * mt.L_rankin);
    CHECK_THROWS_AS(diagonal_term(f, f, 101, table(16), constants()), std::invalid_argument);
}

TEST_CASE("shifted convolution sums") {
    const auto& f = delta();
    const auto& g = f16();
    BumpFunction V;
    // empty constraint
    CHECK(shifted_convolution(f, g, 1, 1, 2 * 2000 + 1, 1000, 50, V, V).value == 0.0);
    CHECK(shifted_convolution(f, g, 1, 1, 2 * 2000 + 1, 1000, 50, V, V).terms == 0);
    // iterating over n instead of m
    for (auto [l1, l2, h] : std::vector<std::tuple<u64, u64, i64>>{{1, 1, 5000}, {2, 3, 777}, {3, 1, 4000}}) {
        const double N = 1e4, M = 400;
        double by_n = 0;
        for (u64 n = 1; double(l1 * n) <= 2 * N; ++n) {
            const i64 num = i64(l1 * n) - h;
            if (num <= 0 || num % i64(l2)) continue;
            const u64 m = u64(num) / l2;
            by_n += f.lam(m) * g.lam(n) * V(double(l2 * m) / M) * V(double(l1 * n) / N);
        }
        auto s = shifted_convolution(f, g, l1, l2, h, N, M, V, V);
        CHECK(s.value == doctest::Approx(by_n).epsilon(1e-12).scale(1.0));
        CHECK(std::isfinite(s.report.ratio));
        CHECK(s.report.family == "shifted-individual");
    }
    auto avg = averaged_shifted_convolution(f, g, 1, 1, 997, 1e5, 1e3, V, V);
    CHECK(avg.report.ratio < 100);
    CHECK(avg.terms > 0);
    // the average is the sum of its pieces
    double pieces = 0;
    for (u64 r = 1; r <= 200; ++r) pieces += shifted_convolution(f, g, 1, 1, i64(997 * r), 1e5, 1e3, V, V).value;
    CHECK(avg.value == doctest::Approx(pieces).epsilon(1e-10).scale(1.0));
    CHECK_THROWS_AS(averaged_shifted_convolution(f, g, 1, 1, 7, 1e4, 1e3, V, V), std::invalid_argument);
}
