#include <random>

#include "doctest.h"
#include "kloosterlab/arith.hpp"

using namespace kloosterlab;

TEST_CASE("factorize small values") {
    auto f = factorize(12);
    REQUIRE(f.factors.size() == 2);
    CHECK(f.factors[0] == std::pair<u64, int>{2, 2});
    CHECK(f.factors[1] == std::pair<u64, int>{3, 1});
    CHECK(f.rad() == 6);
    CHECK(f.square_part() == 2);

    auto one = factorize(1);
    CHECK(one.factors.empty());
    CHECK(one.rad() == 1);
    CHECK(one.square_part() == 1);

    CHECK(factorize(720).part_supported_on(6) == 144);
    CHECK(factorize(720).omega() == 3);
    CHECK(factorize(720).ord(2) == 4);
}

TEST_CASE("part supported on m matches a divisor scan") {
    for (u64 n = 1; n <= 400; ++n) {
        for (u64 m : {2u, 6u, 10u, 35u}) {
            u64 best = 1;
            for (u64 d = 1; d <= n; ++d) {
                if (n % d) continue;
                u64 x = d;
                for (u64 p = 2; p <= x; ++p)
                    while (x % p == 0 && m % p == 0) x /= p;
                if (x == 1) best = d;
            }
            CHECK(factorize(n).part_supported_on(m) == best);
        }
    }
}

TEST_CASE("factorize round-trips on random 63-bit integers") {
    std::mt19937_64 rng(12345);
    for (int i = 0; i < 10000; ++i) {
        u64 n = (rng() >> 1) | 1u;
        if (i % 3 == 0) n = rng() >> 1;
        if (n == 0) n = 1;
        auto f = factorize(n);
        u128 prod = 1;
        u64 prev = 0;
        for (auto [p, e] : f.factors) {
            CHECK(p > prev);
            CHECK(is_prime(p));
            CHECK(e >= 1);
            prev = p;
            for (int k = 0; k < e; ++k) prod *= p;
        }
        CHECK(prod == n);
    }
}

TEST_CASE("factorize rejects out-of-range input") {
    CHECK_THROWS_AS(factorize(0), std::invalid_argument);
    CHECK_THROWS_AS(factorize((u64{1} << 63) + 1), std::overflow_error);
}

TEST_CASE("mod_inverse") {
    CHECK(mod_inverse(3, 7) == 5);
    CHECK(mod_inverse(1, 11) == 1);
    CHECK(mod_inverse(10, 27) == 19);
    CHECK(mod_inverse(-3, 7) == 2);
    CHECK_THROWS_AS(mod_inverse(6, 27), std::domain_error);
}

TEST_CASE("padic_sqrt examples and exponent compatibility") {
    SqrtBranch b5(5), b7(7);
    CHECK(padic_sqrt(1, PrimePowerModulus(5, 2), b5) == 1);
    CHECK(padic_sqrt(4, PrimePowerModulus(7, 3), b7) == 2);

    // brute force: the unique u = 4 mod 7 with u^2 = 2 mod 49
    u64 expect = 0;
    for (u64 u = 4; u < 49; u += 7)
        if (u * u % 49 == 2) expect = u;
    CHECK(b7.choose(2) == 3);  // canonical branch picks the root in [1,3]
    auto upper = SqrtBranch::upper(7);
    CHECK(upper.choose(2) == 4);
    CHECK(padic_sqrt(2, PrimePowerModulus(7, 2), upper) == expect);

    CHECK_THROWS_AS(padic_sqrt(3, PrimePowerModulus(7, 2), b7), std::domain_error);
    CHECK_THROWS_AS(padic_sqrt(14, PrimePowerModulus(7, 2), b7), std::invalid_argument);
}

TEST_CASE("padic_sqrt squares back and is compatible across exponents") {
    for (u64 p : {5u, 7u, 11u, 13u, 101u}) {
        SqrtBranch b(p);
        auto alt = SqrtBranch::flipped(p, [](u64 r) { return r % 3 == 0; });
        for (int s = 1; s <= 5; ++s) {
            PrimePowerModulus q(p, s);
            for (u64 x = 1; x < std::min<u64>(q.q, 3000); ++x) {
                if (x % p == 0 || !b.is_square(x % p)) continue;
                for (const SqrtBranch* br : {&b, &alt}) {
                    u64 r = padic_sqrt(static_cast<i64>(x), q, *br);
                    CHECK(mulmod(r, r, q.q) == x % q.q);
                    CHECK(r % p == br->choose(x % p));
                    for (int t = 1; t < s; ++t) {
                        PrimePowerModulus qt(p, t);
                        CHECK(r % qt.q == padic_sqrt(static_cast<i64>(x), qt, *br));
                    }
                }
            }
        }
    }
}

TEST_CASE("gauss_sign examples") {
    CHECK(gauss_sign(3, PrimePowerModulus(5, 2)) == cplx(1, 0));
    CHECK(gauss_sign(2, PrimePowerModulus(5, 1)) == cplx(-1, 0));
    CHECK(gauss_sign(1, PrimePowerModulus(7, 3)) == cplx(0, 1));
    auto direct = quadratic_gauss_sum(1, 343);
    CHECK(std::abs(direct - std::pow(343.0, 0.5) * cplx(0, 1)) < 1e-9);
    CHECK_THROWS_AS(gauss_sign(5, PrimePowerModulus(5, 1)), std::invalid_argument);
}

TEST_CASE("gauss_sign matches direct summation") {
    for (u64 p : {5u, 7u, 11u, 13u}) {
        for (int s = 1; s <= 3; ++s) {
            PrimePowerModulus q(p, s);
            for (i64 A = 1; A < static_cast<i64>(p); ++A) {
                cplx lhs = quadratic_gauss_sum(A, q.q);
                cplx rhs = std::pow(static_cast<double>(q.q), 0.5) * gauss_sign(A, q);
                CHECK(std::abs(lhs - rhs) < 1e-9);
            }
        }
    }
}

TEST_CASE("kronecker_symbol") {
    CHECK(kronecker_symbol(2, 7) == 1);
    CHECK(kronecker_symbol(0, 5) == 0);
    CHECK(kronecker_symbol(-1, 7) == -1);
    for (u64 p = 3; p <= 100; ++p) {
        if (!is_prime(p)) continue;
        for (i64 a = -50; a <= 150; ++a) {
            u64 e = powmod(static_cast<u64>(mod(a, static_cast<i64>(p))), (p - 1) / 2, p);
            int expect = e == 0 ? 0 : (e == 1 ? 1 : -1);
            CHECK(kronecker_symbol(a, static_cast<i64>(p)) == expect);
        }
    }
    CHECK_THROWS_AS(kronecker_symbol(3, 8), std::invalid_argument);
}
