#include "doctest.h"
#include "kloosterlab/characters.hpp"

using namespace kloosterlab;

namespace {
int count_primitive(u64 q) {
    int c = 0;
    for (auto& chi : enumerate_characters(q)) c += chi.is_primitive();
    return c;
}
} // namespace

TEST_CASE("enumerate_characters examples") {
    CHECK(enumerate_characters(4).size() == 2);
    CHECK(count_primitive(4) == 1);
    CHECK(enumerate_characters(1).size() == 1);
    CHECK(count_primitive(1) == 1);
    CHECK(enumerate_characters(9).size() == 6);
    CHECK(count_primitive(9) == 4);
    CHECK(count_primitive(2) == 0);
    CHECK(count_primitive(6) == 0);
}

TEST_CASE("psi_count") {
    CHECK(psi_count(2) == 0);
    CHECK(psi_count(4) == 1);
    CHECK(psi_count(101) == 99);
    for (u64 q = 1; q <= 500; ++q) CHECK(psi_count(q) == static_cast<u64>(count_primitive(q)));
}

TEST_CASE("char_eval examples") {
    auto chars = enumerate_characters(5);
    CHECK(chars[0](3) == cplx(1, 0));
    for (auto& chi : chars) CHECK(chi(5) == cplx(0, 0));
    auto prim4 = CharacterGroup::create(4)->primitive_characters();
    REQUIRE(prim4.size() == 1);
    CHECK(std::abs(prim4[0](3) - cplx(-1, 0)) < 1e-15);
}

TEST_CASE("characters are multiplicative, periodic and vanish off units") {
    for (u64 q : {1u, 7u, 8u, 12u, 16u, 45u, 60u, 63u, 64u, 100u}) {
        for (auto& chi : enumerate_characters(q)) {
            for (i64 a = 0; a < static_cast<i64>(q); ++a) {
                CHECK(std::abs(chi(a) - chi(a + static_cast<i64>(q))) < 1e-12);
                if (gcd(static_cast<u64>(a), q) != 1) {
                    CHECK(chi(a) == cplx(0, 0));
                    continue;
                }
                CHECK(std::abs(std::abs(chi(a)) - 1.0) < 1e-12);
                for (i64 b = 1; b < static_cast<i64>(q); b += 3)
                    CHECK(std::abs(chi(a * b) - chi(a) * chi(b)) < 1e-12);
            }
        }
    }
}

TEST_CASE("full orthogonality over all characters") {
    for (u64 q = 1; q <= 200; ++q) {
        auto chars = enumerate_characters(q);
        CHECK(chars.size() == euler_phi(q));
        for (i64 n = 0; n < static_cast<i64>(q); ++n) {
            cplx s = 0;
            for (auto& chi : chars) s += chi(n);
            double expect = (mod(n - 1, static_cast<i64>(q)) == 0 && gcd(static_cast<u64>(n), q) == 1)
                                ? static_cast<double>(euler_phi(q))
                                : 0.0;
            if (q == 1) expect = 1.0;
            CHECK(std::abs(s - expect) < 1e-8);
        }
    }
}

TEST_CASE("conductor agrees with the minimal period") {
    for (u64 q = 1; q <= 200; ++q)
        for (auto& chi : enumerate_characters(q)) CHECK(chi.conductor() == conductor_by_period(chi));
}

TEST_CASE("orthogonality_sum examples") {
    CHECK(orthogonality_sum(8, 1) == 2);
    CHECK(orthogonality_sum(5, 2) == -1);
    CHECK(orthogonality_sum(9, 4) == -2);
    for (u64 q = 3; q <= 120; ++q)
        for (i64 n = 1; n < static_cast<i64>(q); ++n)
            if (gcd(static_cast<u64>(n), q) == 1) CHECK_NOTHROW(orthogonality_sum(q, n));
    CHECK_THROWS_AS(orthogonality_sum(9, 3), std::invalid_argument);
}

TEST_CASE("conjugate character") {
    for (auto& chi : enumerate_characters(21)) {
        auto c = chi.conj();
        for (i64 n = 1; n < 21; ++n) CHECK(std::abs(c(n) - std::conj(chi(n))) < 1e-12);
    }
}
