#include <random>

#include "doctest.h"
#include "kloosterlab/congruence.hpp"

using namespace kloosterlab;

namespace {

// g through padic_sqrt and explicit inverses
i64 naive_g(const PhaseParams& pp, i64 m, const SqrtBranch& br) {
    const i64 Q = static_cast<i64>(pp.q.q);
    const i64 x = static_cast<i64>(padic_sqrt(mod(static_cast<i128>(m + pp.a) * pp.u, Q), pp.q, br));
    const i64 y = static_cast<i64>(padic_sqrt(mod(static_cast<i128>(m) * pp.u, Q), pp.q, br));
    const i64 xi = static_cast<i64>(mod_inverse(x, pp.q.q)), yi = static_cast<i64>(mod_inverse(y, pp.q.q));
    return mod(static_cast<i128>(pp.A) * pp.u % Q * xi - static_cast<i128>(pp.B) * pp.u % Q * yi, Q);
}

u64 least_nonresidue(u64 p) {
    u64 v = 2;
    while (kronecker_symbol(static_cast<i64>(v), static_cast<i64>(p)) != -1) ++v;
    return v;
}

} // namespace

TEST_CASE("phase evaluation") {
    for (SqrtBranch br : {SqrtBranch(7), SqrtBranch::upper(7)}) {
        PhaseParams pp{1, 2, 1, 0, 1, PrimePowerModulus(7, 3)};
        CHECK(phase_eval(pp, 1, Phase::g, br) == naive_g(pp, 1, br));
        std::mt19937_64 rng(1);
        PhaseEvaluator ev(pp, br, 3);
        for (int i = 0; i < 200; ++i) {
            i64 m = static_cast<i64>(rng() % 343);
            if (!ev.admissible(m)) {
                CHECK_THROWS_AS(ev(m, Phase::g), std::domain_error);
                continue;
            }
            CHECK(ev(m, Phase::g) == naive_g(pp, m, br));
        }
    }
    PhaseParams same{3, 3, 0, 0, 1, PrimePowerModulus(11, 2)};
    for (i64 m = 1; m < 121; ++m)
        if (PhaseEvaluator(same, SqrtBranch(11), 2).admissible(m)) CHECK(phase_eval(same, m, Phase::g, SqrtBranch(11)) == 0);
    CHECK_THROWS_AS(phase_eval(PhaseParams{1, 1, 1, 0, 1, PrimePowerModulus(3, 2)}, 1, Phase::g, SqrtBranch(3)),
                    std::invalid_argument);
}

TEST_CASE("differencing expansions of g") {
    std::mt19937_64 rng(2);
    for (u64 p : {5, 7, 11}) {
        for (int s : {3, 4}) {
            PrimePowerModulus q(p, s);
            if (q.q > 20000) continue;
            const i64 Q = static_cast<i64>(q.q);
            SqrtBranch br(p);
            for (int trial = 0; trial < 10; ++trial) {
                PhaseParams pp{static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q),
                               0, trial % 2 ? 1 : static_cast<i64>(least_nonresidue(p)), q};
                PhaseEvaluator ev(pp, br, s);
                const i64 inv2 = static_cast<i64>(mod_inverse(2, q.q));
                for (int kappa = 1; 3 * kappa <= s + 2; ++kappa) {
                    const i64 pk = static_cast<i64>(ipow(p, kappa));
                    const i64 p3k = static_cast<i64>(ipow(p, std::min(3 * kappa, s)));
                    for (int i = 0; i < 40; ++i) {
                        i64 m = static_cast<i64>(rng() % q.q), t = static_cast<i64>(rng() % q.q);
                        i64 mt = mod(m + static_cast<i128>(pk) * t, Q);
                        if (!ev.admissible(m)) continue;
                        REQUIRE(ev.admissible(mt));
                        i128 d = static_cast<i128>(ev(mt, Phase::g)) - ev(m, Phase::g) -
                                 static_cast<i128>(ev(m, Phase::g1)) * pk % Q * t % Q -
                                 static_cast<i128>(inv2) * ev(m, Phase::g2) % Q * (pk * pk % Q) % Q * (t * t % Q) % Q;
                        CHECK(mod(d, p3k) == 0);
                        i128 d1 = static_cast<i128>(ev(mt, Phase::g1)) - ev(m, Phase::g1) -
                                  static_cast<i128>(ev(m, Phase::g2)) * pk % Q * t % Q;
                        CHECK(mod(d1, std::min<i64>(pk * pk, Q)) == 0);
                    }
                }
            }
        }
    }
}

TEST_CASE("solution counts at level one") {
    std::mt19937_64 rng(3);
    SqrtBranch br(7);
    for (int i = 0; i < 300; ++i) {
        PhaseParams pp{static_cast<i64>(rng() % 7), static_cast<i64>(rng() % 7), 1 + static_cast<i64>(rng() % 6),
                       static_cast<i64>(rng() % 7), 1 + static_cast<i64>(rng() % 6), PrimePowerModulus(7, 2)};
        if (pp.A == 0 && pp.B == 0) continue;
        auto all = count_solutions(pp, 1, pp.k, SolutionClass::all, br);
        auto ns = count_solutions(pp, 1, pp.k, SolutionClass::nonsingular, br);
        auto sg = count_solutions(pp, 1, pp.k, SolutionClass::singular, br);
        CHECK(all.count <= 4);
        CHECK(all.count == ns.count + sg.count);
    }
    // p | a, A != B mod p: at most one solution, m = (A-B)^2 k^{-2} u when it exists
    for (i64 A = 0; A < 7; ++A)
        for (i64 B = 0; B < 7; ++B)
            for (i64 k = 0; k < 7; ++k) {
                if (A == B) continue;
                PhaseParams pp{A, B, 7, k, 3, PrimePowerModulus(7, 2)};
                auto c = count_solutions(pp, 1, k, SolutionClass::all, br);
                CHECK(c.count <= 1);
                if (k == 0) CHECK(c.count == 0);
                if (c.count == 1) {
                    i64 m = mod((A - B) * (A - B) * static_cast<i64>(mod_inverse(k * k % 7, 7)) * 3, 7);
                    CHECK(PhaseEvaluator(pp, br, 1)(m, Phase::g) == k);
                }
            }
}

TEST_CASE("census additivity and branch invariance") {
    std::mt19937_64 rng(4);
    for (u64 p : {5, 7, 11}) {
        PrimePowerModulus q(p, p == 11 ? 3 : 4);
        for (int i = 0; i < 10; ++i) {
            PhaseParams pp{static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q),
                           static_cast<i64>(rng() % q.q), 1, q};
            int kappa = 1 + static_cast<int>(rng() % q.s);
            auto br2 = SqrtBranch::flipped(p, [](u64 r) { return r % 2 == 1; });
            // a branch change flips the sign of A or B on part of the domain,
            // so only the census over all four sign pairs is invariant
            for (SolutionClass c : {SolutionClass::all, SolutionClass::nonsingular, SolutionClass::singular}) {
                u64 n1 = 0, n2 = 0;
                for (int e1 : {1, -1})
                    for (int e2 : {1, -1}) {
                        PhaseParams ps = pp;
                        ps.A *= e1;
                        ps.B *= e2;
                        n1 += count_solutions(ps, kappa, pp.k, c, SqrtBranch(p)).count;
                        n2 += count_solutions(ps, kappa, pp.k, c, br2).count;
                    }
                CHECK(n1 == n2);
            }
            CHECK(count_solutions(pp, kappa, pp.k, SolutionClass::all, SqrtBranch(p)).count ==
                  count_solutions(pp, kappa, pp.k, SolutionClass::nonsingular, SqrtBranch(p)).count +
                      count_solutions(pp, kappa, pp.k, SolutionClass::singular, SqrtBranch(p)).count);
        }
    }
}

TEST_CASE("Hensel lifting audits") {
    auto sq = hensel_audit(polynomial_problem({-1, 0, 1}, 0, PrimePowerModulus(7, 4)), 1);
    CHECK(sq.hypotheses_met);
    CHECK(sq.constant());
    CHECK(sq.censuses.size() == 4);
    for (auto& c : sq.censuses) CHECK(c.count == 2);

    auto bad = hensel_audit(polynomial_problem({0, 0, 1}, 0, PrimePowerModulus(7, 3)), 1);
    CHECK_FALSE(bad.hypotheses_met);
    CHECK(bad.note.find("hypotheses not met") != std::string::npos);
    CHECK_FALSE(bad.constant());

    std::mt19937_64 rng(5);
    for (u64 p : {5, 7}) {
        PrimePowerModulus q(p, 4);
        for (int i = 0; i < 6; ++i) {
            i64 A0 = 1 + static_cast<i64>(rng() % (p - 1)), a0 = 1 + static_cast<i64>(rng() % (p - 1));
            i64 k0 = 1 + static_cast<i64>(rng() % (p - 1));
            auto au = hensel_audit(aligned_x_problem(A0, a0, 1 + i % 2, k0, 1, q), 1);
            CHECK(au.hypotheses_met);
            CHECK(au.constant());
            CHECK(au.censuses.front().count <= 3);  // x^3 = const mod p
        }
        for (int i = 0; i < 6; ++i) {
            PhaseParams pp{static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q),
                           1 + static_cast<i64>(rng() % (p - 1)), static_cast<i64>(rng() % q.q), 1, q};
            auto au = hensel_audit(g_phase_problem(pp, SqrtBranch(p), true), 1);
            CHECK(au.hypotheses_met);
            CHECK(au.constant());
        }
    }
}

TEST_CASE("singular census: roots, special values and the set T") {
    std::mt19937_64 rng(6);
    for (u64 p : {5, 7, 11}) {
        PrimePowerModulus q(p, p == 5 ? 3 : 2);
        const i64 Q = static_cast<i64>(q.q);
        const i64 nr = static_cast<i64>(least_nonresidue(p));
        for (int i = 0; i < 12; ++i) {
            PhaseParams pp{static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q),
                           1 + static_cast<i64>(rng() % (p - 1)), 0, i % 2 ? 1 : nr, q};
            if (pp.A % static_cast<i64>(p) == 0 && pp.B % static_cast<i64>(p) == 0) continue;
            SqrtBranch br(p);
            auto c = singular_census(pp, br);
            CHECK(c.roots.size() <= 3);
            CHECK(static_cast<int>(c.roots.size()) == c.roots_mod_p);
            CHECK(c.ki_units);
            CHECK(c.g2_units);
            CHECK(c.setT.size() <= 12);
            for (i64 t : c.setT) CHECK(t % static_cast<i64>(p) != 0);
            // a second choice of coset representatives
            auto c2 = singular_census(pp, br, 4, 4 * nr);
            for (const auto* cc : {&c, &c2}) {
                for (i64 k = 0; k < Q; ++k) {
                    const i64 l = mod(static_cast<i128>(k) * k % Q * pp.a, Q);
                    for (int lam = 1; lam <= q.s; ++lam) {
                        const i64 pl = static_cast<i64>(ipow(p, lam));
                        bool hit = false;
                        for (i64 ki : c.special_values) hit = hit || mod(k - ki, pl) == 0;
                        if (!hit) continue;
                        bool inT = false;
                        for (i64 t : cc->setT) inT = inT || mod(l - t, pl) == 0;
                        CHECK(inT);
                    }
                }
            }
        }
    }
}

TEST_CASE("singular solution counts stay within small constants") {
    std::mt19937_64 rng(7);
    double worst = 0, worstT = 0;
    for (u64 p : {5, 7, 11}) {
        for (int s = 2; s <= 5; ++s) {
            PrimePowerModulus q(p, s);
            if (q.q > 20000) continue;
            SqrtBranch br(p);
            for (int i = 0; i < 6; ++i) {
                PhaseParams pp{static_cast<i64>(rng() % q.q), static_cast<i64>(rng() % q.q),
                               1 + static_cast<i64>(rng() % (p - 1)), 0, 1, q};
                if (pp.A % static_cast<i64>(p) == 0 && pp.B % static_cast<i64>(p) == 0) continue;
                auto c = singular_census(pp, br);
                std::vector<i64> ks;
                for (i64 ki : c.special_values)
                    for (int j = 0; j < 3; ++j) ks.push_back(mod(ki + static_cast<i64>(ipow(p, 1 + j)) * (1 + j), q.q));
                for (int j = 0; j < 4; ++j) ks.push_back(static_cast<i64>(rng() % q.q));
                for (i64 k : ks) {
                    pp.k = k;
                    for (int kappa = 1; kappa <= s; ++kappa) {
                        auto r = singular_count_report(pp, kappa, c, br);
                        worst = std::max(worst, r.ratio);
                        CHECK(r.lhs <= 3 * r.params.at("s_i_sum") + (r.lhs == 0 ? 0 : 3));
                        worstT = std::max(worstT, singular_count_report_T(pp, kappa, c, br).ratio);
                    }
                }
            }
        }
    }
    CHECK(worst < 10.0);
    CHECK(worstT < 10.0);
}
