#pragma once

#include <array>
#include <optional>
#include <vector>

#include "kloosterlab/arith.hpp"

namespace kloosterlab {

// ---------------------------------------------------------------------------
// Kloosterman sums

// S(m, n; c) by direct summation over the units. Throws std::logic_error if
// the imaginary part exceeds 1e-8 c (it must vanish).
double kloosterman(i64 m, i64 n, u64 c);

// Fast repeated evaluation of S(m, n; c) for a fixed c: CRT splitting into
// prime powers, the closed form for p^s with p > 3, s >= 2, and table-driven
// direct sums for the rest.
class KloostermanEvaluator {
public:
    explicit KloostermanEvaluator(u64 c);
    u64 modulus() const { return c_; }
    double operator()(i64 m, i64 n) const;

private:
    struct Part {
        u64 p;
        int s;
        u64 q;
        u64 cofactor_inv;  // (c/q)^{-1} mod q
        bool closed_form;
        std::vector<std::uint32_t> inv;  // 0 on non-units; filled for direct parts
        std::vector<double> cosine;      // cos(2 pi j / q)
        std::vector<i64> sqrt_of;        // square roots mod q for closed-form parts
    };
    double part_value(const Part& part, i64 m, i64 n) const;

    u64 c_;
    std::vector<Part> parts_;
};

// The evaluation p^{s/2} sum_{+-} tau(+-(mn)_{1/2}, p^s) e(+-2(mn)_{1/2}/p^s),
// or 0 when p | n or mn is not a square mod p. Requires p > 2, s >= 2 and
// p not dividing m (std::invalid_argument otherwise).
double kloosterman_explicit(i64 m, i64 n, const PrimePowerModulus& q, const SqrtBranch& branch);

// One branch S^eps(m, n; p^s) = p^{s/2} tau(eps (mn)_{1/2}, p^s) e(2 eps (mn)_{1/2}/p^s),
// set to 0 when mn is not a unit square mod p.
cplx kloosterman_eps(int eps, i64 m, i64 n, const PrimePowerModulus& q, const SqrtBranch& branch);

// S(m, n; r1 r2) as S(r2' m, r2' n; r1) S(r1' m, r1' n; r2) with r' the
// inverses; both sides are computed and a mismatch above 1e-8 relative
// throws std::logic_error. Non-coprime moduli throw std::invalid_argument.
double kloosterman_split(i64 m, i64 n, u64 r1, u64 r2);

// ---------------------------------------------------------------------------
// Complete sums

enum class SigmaVariant { Full, Sharp, SingleEps };

struct CompleteSumSpec {
    i64 n1 = 1, n2 = 1, a = 0, k = 0;
    u64 q = 5;
    SigmaVariant variant = SigmaVariant::Full;
    std::array<int, 4> eps{1, 1, 1, 1};  // only read for SingleEps
};

// Sigma(n1, n2, a, k; q) = sum over m mod q with (m(m+a), q) = 1 of
// S(m+a,n1)S(m+a,n2)S(m,n1)S(m,n2) e(-km/q); not real in general when
// k != 0. Composite q goes through the CRT product of prime-power factors.
// Sharp and SingleEps need q = p^s with p > 2, s >= 2, n1 n2 a unit square
// mod p, and (for Sharp) p | a. Moduli above 10^7 are rejected.
cplx sigma_complete(const CompleteSumSpec& spec, const SqrtBranch* branch = nullptr);

// Direct summation with kloosterman() for every factor; the oracle.
cplx sigma_direct(i64 n1, i64 n2, i64 a, i64 k, u64 q);

// The smallest positive representative of the square class of n mod p.
u64 square_class_rep(i64 n, u64 p);

// Sigma[A, B, a, k; p^s] = sum over units m with m, m+a in u * squares of
// e((2A((m+a)u)_{1/2} - 2B(mu)_{1/2} - km)/p^s). Requires p > 3.
cplx sigma_reduced(i64 A, i64 B, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch);

// The parameters (A, B) attached to eps = (e1, e2, e3, e4):
// A = e1 (n1 u')_{1/2} + e3 (n2 u')_{1/2}, B = e2 (n1 u')_{1/2} + e4 (n2 u')_{1/2}
// with u' = u^{-1}, reduced mod q.
std::pair<i64, i64> decomposition_params(const std::array<int, 4>& eps, i64 n1, i64 n2, i64 u,
                                         const PrimePowerModulus& q, const SqrtBranch& branch);

// The Gauss-sign weight of eps: 1 for even s, ((e1 e2 e3 e4)/p) for odd s.
int decomposition_sign(const std::array<int, 4>& eps, const PrimePowerModulus& q);

// Compares Sigma against p^{2s} sum_eps tau^[eps] Sigma[A^eps, B^eps, a, k]
// (and the sharp analogue when p | a). lhs is the largest residual, rhs the
// tolerance 1e-6 q^{5/2}. When p divides n1 or n2 the decomposition is not
// attempted and lhs = |Sigma|, which must vanish.
BoundReport decomposition_audit(i64 n1, i64 n2, i64 a, i64 k, const PrimePowerModulus& q, const SqrtBranch& branch);

// For p^nu || A, B with nu < s: the vanishing clause (p^nu must divide k)
// and the reduction Sigma[A,B,a,k;p^s] = p^nu Sigma[A/p^nu, B/p^nu, a, k/p^nu; p^{s-nu}].
// For nu >= s the sum only sees m mod p: it vanishes unless p^{s-1} | k,
// counts the admissible m when p^s | k, and is otherwise
// p^{s-1} sum_{r mod p} e(-kr/p^s) over admissible r.
// lhs is the residual, rhs the tolerance 1e-6 (1 + |Sigma|).
BoundReport reduction_audit(i64 A, i64 B, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch);

// |Sigma(n1,n2,a,k;p)| against p^{5/2} (p, a(n1-n2), k)^{1/2} for prime p.
BoundReport prime_sigma_report(i64 n1, i64 n2, i64 a, i64 k, u64 p);

// sum_{eps} Sigma[eps A, eps A, a, k; p^s] for p | a, against
// q^{1/2} (q, Aa, k)^{1/2}; params["predicted_zero"] is 1 when (Aa, q/p)
// does not divide k and params["vanishing_violation"] flags a nonzero sum
// there.
BoundReport aligned_sigma_report(i64 A, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch);

// 1/2 sum over units x of e((2Ax((1 + a u x'^2)^{1/2} - 1) - k u' x^2)/p^s)
// with the 1-unit root and x' = x^{-1}; requires p | a.
cplx sigma_tilde(i64 A, i64 a, i64 k, const PrimePowerModulus& q, i64 u);

// The rational phase of the prime case, v -> R(v) with
// R(v) = A(v + au/v) + B(v - au/v) - k/(4u) (v - au/v)^2.
i64 rational_phase(i64 A, i64 B, i64 a, i64 k, i64 u, i64 v, u64 p);

// The Weil-type check: |sum_{v != 0} e(R(v)/p)| against
// (deg f1 + 2 deg f2 - 1) sqrt(p) + 1 for R = f1/f2 in lowest terms.
// Empty when f1/f2 is constant.
std::optional<BoundReport> rational_phase_report(i64 A, i64 B, i64 a, i64 k, i64 u, u64 p);

// |sum_{eps in {+-1}^2} Sigma[e1 A, e2 B, a, k; p] - sum_{v^2 != +-au} e(R(v)/p)|
// for p not dividing a.
double prime_sigma_hat_residual(i64 A, i64 B, i64 a, i64 k, i64 u, const SqrtBranch& branch);

// ---------------------------------------------------------------------------
// Short sums

struct ShortSumSpec {
    i64 A = 0;
    double M = 2.0;
    u64 r = 1;
    u64 q = 1;
    i64 n1 = 1, n2 = 1;
    u64 s = 1;
};

// sum_{A < m <= A + M, (m, q) = 1} S(m, n1, r) S(m, n2, r)
double short_product_sum(const ShortSumSpec& spec);
double short_product_sum(const ShortSumSpec& spec, const KloostermanEvaluator& kl);

// The sigma term of the short-sum bound:
// r^{5/4} s^{1/4} (r/(r, s^inf))_sq^{1/4}, or 0 if r/(r, s^inf) is cube-free.
double short_sum_sigma(u64 r, u64 s);

// lhs = |short_product_sum|, rhs = eps_proxy(r) (M^{1/2} r s^{1/2} +
// M^{1/2} r^{5/4} s^{-1/4} + M r^{3/4} (r, n1-n2)^{1/4} s^{1/4} + r s + sigma).
// Rejects s not dividing r or (r, 6^inf) not dividing s.
BoundReport theorem5_bound(const ShortSumSpec& spec, double eps_power);
BoundReport theorem5_bound(const ShortSumSpec& spec, double eps_power, const KloostermanEvaluator& kl);

// ---------------------------------------------------------------------------
// Differencing and completion

using PeriodicTable = std::vector<cplx>;

// sum_i sum_{m mod r1} b1i(m + hHr2) conj(b1i(m)) e(-km/r1)
cplx bhat_sum(const std::vector<PeriodicTable>& b1, i64 h, i64 H, u64 r1, u64 r2, i64 k);

// The same for every k mod r1 at once (index k), by FFT.
std::vector<cplx> bhat_all(const std::vector<PeriodicTable>& b1, i64 h, i64 H, u64 r2);

struct WeylReports {
    BoundReport differencing;  // differencing step, with b1i cut to (A, A+M]
    BoundReport completion;    // completion, worst case over the sequences tried
    BoundReport combined;      // the two together, via bhat sums
};

// |sum_{A < m <= A+M} sum_i b1i(m) b2i(m)|^2 against the three right-hand
// sides with implied constants 1. b1 tables have period r1 (= size),
// b2 tables period r2; mismatched sizes throw std::invalid_argument.
WeylReports weyl_completion_audit(const std::vector<PeriodicTable>& b1, const std::vector<PeriodicTable>& b2, i64 H,
                                  i64 M, i64 A);

// The Kloosterman instance: b1(m) = S(r2' m, r2' n1, r1) S(r2' m, r2' n2, r1)
// with period r1 and b2(m) = S(r1' m, r1' n1, r2) S(r1' m, r1' n2, r2) with
// period r2, zero when (m, r1 r2) > 1.
std::pair<PeriodicTable, PeriodicTable> kloosterman_pair_tables(i64 n1, i64 n2, u64 r1, u64 r2);

// Builds the eps-split b1 tables for the first `sharp_count` prime powers of
// r1 (ordered by prime; each must have exponent >= 2 and divide (hH r2)^inf),
// evaluates sum_eps bhat directly and compares it with the product of
// Sigma-sharp / Sigma factors. Returns the relative residual.
double bhat_product_residual(i64 n1, i64 n2, u64 r1, u64 r2, i64 h, i64 H, i64 k, int sharp_count);

} // namespace kloosterlab
