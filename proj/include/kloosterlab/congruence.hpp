#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kloosterlab/arith.hpp"

namespace kloosterlab {

// Parameters of the stationary-phase problem for
// f(m) = 2A((m+a)u)_{1/2} - 2B(mu)_{1/2} - km  mod p^s.
struct PhaseParams {
    i64 A = 1, B = 1, a = 1, k = 0;
    i64 u = 1;
    PrimePowerModulus q{5, 2};
};

// g = f' + k and its next two derivatives (up to the usual constants):
//   g  = A u ((m+a)u)^{-1/2} - B u (mu)^{-1/2}
//   g1 = -(1/2) A u^2 ((m+a)u)^{-3/2} + (1/2) B u^2 (mu)^{-3/2}
//   g2 = (3/4) A u^3 ((m+a)u)^{-5/2} - (3/4) B u^3 (mu)^{-5/2}
enum class Phase { g, g1, g2 };

enum class SolutionClass { all, nonsingular, singular };

struct SolutionCensus {
    int kappa = 1;
    u64 count = 0;
    SolutionClass classification = SolutionClass::all;
};

// Evaluates the phases mod p^level, with square roots taken from `branch`
// (the values mod p^level are the reductions of those mod p^s).
class PhaseEvaluator {
public:
    PhaseEvaluator(const PhaseParams& params, const SqrtBranch& branch, int level);
    const PrimePowerModulus& modulus() const { return q_; }
    // m and m+a both units in u * squares
    bool admissible(i64 m) const;
    // std::domain_error for inadmissible m
    i64 operator()(i64 m, Phase which) const;

private:
    PhaseParams params_;
    PrimePowerModulus q_;
    SqrtTable roots_;
    i64 inv2_, inv4_;
};

// One phase value mod p^s. Rejects p in {2, 3}.
i64 phase_eval(const PhaseParams& params, i64 m, Phase which, const SqrtBranch& branch);

// Exhaustive count of admissible m mod p^kappa with g(m) = target mod p^kappa,
// filtered by whether p | g1(m). Requires 1 <= kappa <= s, p^kappa <= 10^7.
SolutionCensus count_solutions(const PhaseParams& params, int kappa, i64 target, SolutionClass classification,
                               const SqrtBranch& branch);

// ---------------------------------------------------------------------------
// Hensel lifting

// f, f1 : domain -> Z/p^s with f1 meant to be the derivative of f. The
// domain must be a union of classes mod p^kappa for the kappa audited.
struct HenselProblem {
    PrimePowerModulus q;
    std::function<bool(i64)> domain;
    std::function<i64(i64)> f;
    std::function<i64(i64)> f1;
    i64 target = 0;
};

struct HenselAudit {
    bool hypotheses_met = false;
    std::string note;  // why the hypotheses failed, if they did
    std::vector<SolutionCensus> censuses;  // kappa_base .. s
    bool constant() const;
};

// Checks by brute force, on the solutions at level kappa_base, that f1 is a
// unit and that f(m + p^mu t) - f(m) - p^mu f1(m) t vanishes mod p^{mu+1} for
// kappa_base <= mu < s; then counts solutions of f = target mod p^mu for every
// kappa_base <= mu <= s.
HenselAudit hensel_audit(const HenselProblem& problem, int kappa_base);

// The stationary-point problem g(m) = k with g1 as derivative; with
// nonsingular_only the domain drops the m with p | g1(m).
HenselProblem g_phase_problem(const PhaseParams& params, const SqrtBranch& branch, bool nonsingular_only);

// The aligned-case map on units x mod p^s,
// f(x) = A0 ((1 + p^alpha a0 u x^{-2})^{-1/2} - 1)/p^alpha - k0 u^{-1} x,
// with f1(x) = A0 a0 u x^{-3} - k0 u^{-1}. Needs alpha >= 1.
HenselProblem aligned_x_problem(i64 A0, i64 a0, int alpha, i64 k0, i64 u, const PrimePowerModulus& q);

// f = sum coeffs[i] m^i on all of Z/p^s, f1 its formal derivative.
HenselProblem polynomial_problem(const std::vector<i64>& coeffs, i64 target, const PrimePowerModulus& q);

// ---------------------------------------------------------------------------
// Singular solutions

struct SingularCensus {
    std::vector<i64> roots;           // m_i mod p^s with g1(m_i) = 0 mod p^s
    std::vector<i64> special_values;  // k_i = g(m_i) mod p^s
    std::vector<i64> setT;            // sorted, distinct, mod p^s
    int roots_mod_p = 0;              // solutions of g1 = 0 mod p
    bool ki_units = true;             // every k_i prime to p
    bool g2_units = true;             // every g2(m_i) prime to p
};

// params.k is ignored. T is built from the representatives (v1, v2) of the
// two square classes mod p (default: 1 and the least non-residue) as
// { g(m, A, eps B, v_j)^2 v_j : g1(m, A, eps B, v_j) = 0 mod p^s }.
// Requires p > 3, p not dividing a, and p not dividing both A and B.
SingularCensus singular_census(const PhaseParams& params, const SqrtBranch& branch);
SingularCensus singular_census(const PhaseParams& params, const SqrtBranch& branch, i64 v1, i64 v2);

// max_i ord_p(k - k_i), capped at s; -1 when there are no k_i.
int rho(i64 k, const std::vector<i64>& special_values, const PrimePowerModulus& q);

// Singular solution count of g = k mod p^kappa against
// p^{floor(min(rho(k), kappa)/2)}; params also carry the s_i sum.
BoundReport singular_count_report(const PhaseParams& params, int kappa, const SingularCensus& census,
                                  const SqrtBranch& branch);

// The same count against p^{floor(min(rho~(k^2 a), kappa)/2)} with
// rho~(l) = max_{t in T} ord_p(l - t).
BoundReport singular_count_report_T(const PhaseParams& params, int kappa, const SingularCensus& census,
                                    const SqrtBranch& branch);

} // namespace kloosterlab
