#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "kloosterlab/arith.hpp"
#include "kloosterlab/hecke.hpp"

using namespace kloosterlab;

namespace {

// Ramanujan tau by the naive product q prod (1-q^n)^24, exact in BigInt.
std::vector<BigInt> naive_tau(std::size_t len) {
    std::vector<BigInt> s(len, 0);
    s[0] = 1;
    for (std::size_t n = 1; n < len; ++n)
        for (int r = 0; r < 24; ++r)
            for (std::size_t i = len; i-- > n;) s[i] -= s[i - n];
    return s;  // s[j] = tau(j+1)
}

std::vector<BigInt> naive_eisenstein(std::size_t len, int c, int pw) {
    std::vector<BigInt> e(len, 0);
    e[0] = 1;
    for (std::size_t n = 1; n < len; ++n) {
        BigInt sig = 0;
        for (std::size_t d = 1; d <= n; ++d)
            if (n % d == 0) sig += boost::multiprecision::pow(BigInt(d), pw);
        e[n] = c * sig;
    }
    return e;
}

std::vector<BigInt> naive_mul(const std::vector<BigInt>& a, const std::vector<BigInt>& b) {
    std::vector<BigInt> r(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; i + j < a.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

} // namespace

TEST_CASE("weight 12 coefficients are Ramanujan tau") {
    auto f = compute_coefficients(12, 400);
    CHECK(f.coeff(1) == 1);
    CHECK(f.coeff(2) == -24);
    CHECK(f.coeff(3) == 252);
    CHECK(f.coeff(6) == -6048);
    auto t = naive_tau(400);
    for (u64 n = 1; n <= 400; ++n) CHECK(f.coeff(n) == t[n - 1]);
}

TEST_CASE("higher weights match naive Delta * E4^a * E6^b") {
    const std::size_t len = 80;
    auto e4 = naive_eisenstein(len, 240, 3), e6 = naive_eisenstein(len, -504, 5);
    std::vector<std::pair<int, std::pair<int, int>>> ab = {
        {16, {1, 0}}, {18, {0, 1}}, {20, {2, 0}}, {22, {1, 1}}, {26, {2, 1}}};
    for (auto [k, pq] : ab) {
        auto s = naive_tau(len);  // s[j] is the coefficient of q^{j+1}
        for (int i = 0; i < pq.first; ++i) s = naive_mul(s, e4);
        for (int i = 0; i < pq.second; ++i) s = naive_mul(s, e6);
        auto f = compute_coefficients(k, len);
        for (u64 n = 1; n <= len; ++n) CHECK(f.coeff(n) == s[n - 1]);
    }
    CHECK_THROWS_AS(compute_coefficients(14, 10), std::invalid_argument);
}

TEST_CASE("multiplicativity, Hecke recursion and Deligne bound") {
    for (int k : supported_weights()) {
        const u64 N = 20000;
        auto f = compute_coefficients(k, N);
        std::mt19937_64 rng(7 + k);
        for (int i = 0; i < 10000; ++i) {
            u64 m = 1 + rng() % 140, n = 1 + rng() % 140;
            if (gcd(m, n) != 1) continue;
            CHECK(f.coeff(m * n) == f.coeff(m) * f.coeff(n));
        }
        BigInt pk = BigInt(1);
        for (u64 p = 2; p <= N; ++p) {
            if (!is_prime(p)) continue;
            BigInt pw = 1;
            for (int i = 0; i < k - 1; ++i) pw *= p;
            for (u64 pn = p, prev = 1; pn * p <= N; prev = pn, pn *= p)
                CHECK(f.coeff(pn * p) == f.coeff(p) * f.coeff(pn) - pw * f.coeff(prev));
        }
        for (u64 n = 1; n <= N; ++n) CHECK(std::abs(f.lam(n)) <= static_cast<double>(divisor_count(n)) + 1e-9);
    }
}

TEST_CASE("hecke_composition") {
    auto f = compute_coefficients(12, 1000);
    CHECK(hecke_composition(f, 3, 5) == doctest::Approx(f.lam(15)).epsilon(1e-12));
    CHECK(hecke_composition(f, 2, 2) == doctest::Approx(f.lam(2) * f.lam(2) - 1).epsilon(1e-12));
    CHECK(hecke_composition(f, 4, 6) == doctest::Approx(f.lam(24)).epsilon(1e-12));
    for (u64 n = 1; n <= 30; ++n)
        for (u64 m = 1; m <= 30; ++m) CHECK_NOTHROW(hecke_composition(f, n, m));
    CHECK_THROWS_AS(hecke_composition(f, 100, 100), std::out_of_range);
}

TEST_CASE("eigenvalue statistics") {
    auto f = compute_coefficients(12, 10000);
    auto one = eigenvalue_statistics(f, 1, 0.3);
    CHECK(one.rankin_sum == doctest::Approx(1.0));
    CHECK(std::abs(one.wilton_sum - e_real(0.3)) < 1e-14);
    auto rs = eigenvalue_statistics(f, 1000, 0.0);
    CHECK(rs.rankin_sum / 1000 > 0.3);
    CHECK(rs.rankin_sum / 1000 < 0.5);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        auto st = eigenvalue_statistics(f, 10000, U(rng));
        worst = std::max(worst, std::abs(st.wilton_sum) / 100.0);
    }
    CHECK(worst < 10.0);
}

TEST_CASE("coefficient cache round-trip and checksum guard") {
    auto f = compute_coefficients(16, 3000);
    std::string path = "hecke_cache_roundtrip.klcf";
    write_cache(f, path);
    auto g = read_cache(path, 16, 2000);
    REQUIRE(g);
    CHECK(g->n_max == 3000);
    for (u64 n = 1; n <= 3000; ++n) {
        CHECK(g->coeff(n) == f.coeff(n));
        CHECK(g->lam(n) == f.lam(n));
    }
    CHECK_FALSE(read_cache(path, 12, 10));
    CHECK_FALSE(read_cache(path, 16, 4000));
    {
        std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
        io.seekp(100);
        io.put('\x55');
    }
    CHECK_FALSE(read_cache(path, 16, 10));
    std::remove(path.c_str());
}
