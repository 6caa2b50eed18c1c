#pragma once

#include <optional>
#include <vector>

#include "kloosterlab/analytic.hpp"
#include "kloosterlab/characters.hpp"
#include "kloosterlab/hecke.hpp"

namespace kloosterlab {

// ---------------------------------------------------------------------------
// Euler factors at the primes dividing q

struct LocalFactors {
    cplx P = 1.0, Q = 1.0;  // at the requested s
    double P1 = 1.0, Q1 = 1.0;
    double logderiv_P = 0.0, logderiv_Q = 0.0;  // P'(1)/P(1), Q'(1)/Q(1)
};

// P(s) = prod_{p | q} (1 - l(p^2) p^-s + l(p^2) p^-2s - p^-3s) (1 - p^-2s)^-1
// with l = lambda_1, and Q(s) the degree-4 analogue for f1 x f2. Tables must
// reach p^2 for every p | q.
LocalFactors local_factors(const Newform& f1, const Newform& f2, u64 q, cplx s = 1.0);

// ---------------------------------------------------------------------------
// L(s, sym^2 f) and L(s, f1 x f2) at s = 1

// A self-dual L-function of conductor 1 with root number 1 and gamma factor
// prod_j pi^{-(s+mu_j)/2} Gamma((s+mu_j)/2); a[0] is unused.
struct SelfDualL {
    std::vector<double> a;
    std::vector<double> mu;
};

// Dirichlet coefficients up to N from lambda(p), p <= N, through the local
// recursions (Satake parameters alpha, beta with alpha beta = 1).
SelfDualL sym2_lfunction(const Newform& f, u64 N);
SelfDualL rankin_lfunction(const Newform& f1, const Newform& f2, u64 N);

// Number of terms the approximate functional equation needs at s:
// smallest power of two N with |V(N)| N^{1 - Re z} (log N)^3 < tol for
// z = s and 1 - s. This is the declared tail heuristic.
u64 afe_length(const std::vector<double>& mu, cplx s, double kernel_scale, double tol = 1e-15);

// Smoothed approximate functional equation with G(w) = exp((w/kernel_scale)^2).
// Throws std::out_of_range if L.a is shorter than afe_length.
cplx afe_evaluate(const SelfDualL& L, cplx s, double kernel_scale = 8.0);

struct LValue {
    double value = 0.0;
    double logderiv = 0.0;  // L'(1)/L(1), by a complex step in s
    u64 terms = 0;
};

// Throws std::out_of_range when the coefficient table is too short.
LValue sym2_l_value(const Newform& f, double kernel_scale = 8.0);
// std::invalid_argument for f1 = f2 (pole at s = 1).
LValue rankin_l_value(const Newform& f1, const Newform& f2, double kernel_scale = 8.0);

// ---------------------------------------------------------------------------
// Main term

// gamma - (1/2) log 2 pi + psi(k/2) + L'/L(1, sym^2 f) - 2 zeta'(2)/zeta(2),
// the constant as printed.
double constant_c(const Newform& f);
double constant_c(const Newform& f, const LValue& sym2);

// The constant the residue computation actually produces: log 2 pi in place
// of (1/2) log 2 pi.
double constant_c_derived(const Newform& f, const LValue& sym2);

struct MomentConstants {
    bool same_form = true;
    LValue sym2;                   // of f1
    std::optional<LValue> rankin;  // f1 != f2 only
    double c = 0.0, c_derived = 0.0;
};
MomentConstants moment_constants(const Newform& f1, const Newform& f2);

struct MainTermParams {
    double P1 = 1.0, logderiv_P = 0.0, Q1 = 1.0;
    double L_sym2 = 0.0, L_rankin = 0.0;
    double c = 0.0, c_derived = 0.0;
    // prod_{p | q} (1 - 1/p) and sum_{p | q} log p / (p - 1), from the
    // Euler factors of zeta at p | q that the printed P leaves out
    double radical_factor = 1.0, radical_logderiv = 0.0;
    bool same_form = true;
};
MainTermParams main_term_params(const Newform& f1, const Newform& f2, u64 q, const MomentConstants& mc);

enum class MainTermForm {
    derived,  // residue at s = 0 of the diagonal Mellin integral
    printed,  // P(1) L (log q + c + P'/P) with c from constant_c
};

// M(f1, f2, q); for f1 != f2 both forms are Q(1) L(1, f1 x f2).
double main_term_M(const MainTermParams& mt, u64 q, MainTermForm form = MainTermForm::derived);

// (2 / zeta(2)) psi(q) M(f1, f2, q)
double main_term(const MainTermParams& mt, u64 q, MainTermForm form = MainTermForm::derived);

// ---------------------------------------------------------------------------
// Central values

// sum_{n,m} (l1(m) l2(n) + l2(m) l1(n)) chi(m) conj chi(n) (nm)^{-1/2} W(nm/q^2)
// by the plain double sum over nm < x_cut q^2. Rejects imprimitive chi and
// weight pairs with k1 != k2 mod 4; throws std::logic_error if the
// imaginary part exceeds 1e-6 (1 + |value|).
double central_product(const Newform& f1, const Newform& f2, const DirichletCharacter& chi, const WeightTable& W);

// L(1/2, f x chi) for primitive chi mod q from its own functional equation:
// sum lambda(n) chi(n) n^{-1/2} V(n/q) + eps sum lambda(n) conj chi(n) n^{-1/2} V(n/q),
// V(y) = Q(k/2, 2 pi y), eps = i^k tau(chi)^2 / q.
cplx twisted_central_value(const Newform& f, const DirichletCharacter& chi);

// ---------------------------------------------------------------------------
// Diagonal term

struct DiagonalResult {
    u64 q = 1;
    u64 psi = 0;
    double delta = 0.0;        // 2 psi(q) sum_{(n,q)=1} l1 l2(n)/n W(n^2/q^2)
    double closed_form = 0.0;  // 2 psi(q) M / zeta(2), derived form
    double closed_form_printed = 0.0;
    double deviation = 0.0;  // |delta / closed_form - 1|
    double deviation_printed = 0.0;
    u64 terms = 0;
};

DiagonalResult diagonal_term(const Newform& f1, const Newform& f2, u64 q, const WeightTable& W,
                             const MomentConstants& mc);

// ---------------------------------------------------------------------------
// The moment

struct MomentOptions {
    bool keep_per_character = false;
    bool naive_check = false;  // also run central_product per character (q <= 60)
};

struct MomentResult {
    u64 q = 1;
    u64 psi = 0;
    double empirical = 0.0;  // sum over primitive chi, real part
    double imag_residue = 0.0;  // max |Im| / (1 + |value|) over chi
    double main_term = 0.0;
    double ratio = 0.0;
    // |sum_t H(t) sum*_chi chi(t) - empirical| / (1 + |empirical|), through
    // the closed form of the orthogonality sum
    double orthogonality_residual = 0.0;
    double naive_residual = -1.0;  // max relative gap to central_product; -1 if not run
    u64 pairs = 0;                 // (n, m) pairs with n <= m inside the cut
    std::vector<double> per_character;  // in primitive_characters() order
};

// Coefficient range the moment at q needs: floor(x_cut q^2).
u64 moment_table_length(u64 q, const WeightTable& W);

// Requires q != 2 mod 4, q <= 700, k1 = k2 mod 4 and W built for (k1, k2)
// with x_min <= 1/q^2. The double sum is folded once into
// H(t) = sum_{m = t n mod q} c(n, m), t a unit, and each character value is
// then sum_t chi(t) H(t). Work over n is spread over worker_count()
// threads with an ordered merge.
MomentResult moment_experiment(const Newform& f1, const Newform& f2, u64 q, const WeightTable& W,
                               const MainTermParams& mt, const MomentOptions& opt = {});

// ---------------------------------------------------------------------------
// Shifted convolution sums

struct ShiftedSum {
    double value = 0.0;
    u64 terms = 0;
    BoundReport report;
};

// D = sum_{l1 n - l2 m = h} l1(m) l2(n) V1(l2 m / M) V2(l1 n / N) with V1, V2
// supported in [1, 2]; report against (N + M)^{1/2 + 7/64} eps_proxy(NM).
ShiftedSum shifted_convolution(const Newform& f1, const Newform& f2, u64 l1, u64 l2, i64 h, double N, double M,
                               const RealFunction& V1, const RealFunction& V2, double eps_power = 2.0);

// S = sum_{r >= 1} D(l1, l2, r d, N, M), reported against
// eps_proxy(dN) (N d^{-1/2} + N^{5/4} M^{1/4} / d + N^{3/4} M^{1/4} d^{-1/4} + N M^{1/2} d^{-3/4}).
// Requires N >= 20 M.
ShiftedSum averaged_shifted_convolution(const Newform& f1, const Newform& f2, u64 l1, u64 l2, u64 d, double N,
                                        double M, const RealFunction& V1, const RealFunction& V2,
                                        double eps_power = 2.0);

} // namespace kloosterlab
