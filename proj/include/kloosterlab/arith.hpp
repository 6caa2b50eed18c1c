#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "kloosterlab/common.hpp"

namespace kloosterlab {

// Canonical factorization n = prod p^e with helpers for the usual
// arithmetic functions.
struct Factorization {
    u64 value = 1;
    std::vector<std::pair<u64, int>> factors;

    u64 rad() const;
    // largest m with m^2 | n
    u64 square_part() const;
    int omega() const { return static_cast<int>(factors.size()); }
    int ord(u64 p) const;
    // (n, m^inf): the largest divisor of n supported on the primes of m
    u64 part_supported_on(u64 m) const;
    u64 num_divisors() const;
    u64 euler_phi() const;
    int moebius() const;
    bool is_cube_free() const;
    std::vector<u64> divisors() const;
};

Factorization factorize(u64 n);

bool is_prime(u64 n);
u64 mulmod(u64 a, u64 b, u64 m);
u64 powmod(u64 a, u64 e, u64 m);
u64 gcd(u64 a, u64 b);
u64 gcd_signed(i64 a, i64 b);
int ord_p(i64 n, u64 p);
u64 ipow(u64 b, int e);
u64 euler_phi(u64 n);
int moebius(u64 n);
u64 divisor_count(u64 n);

// Inverse of a modulo m in [0, m). Throws std::domain_error when
// gcd(a, m) != 1.
u64 mod_inverse(i64 a, u64 m);

// Jacobi symbol (a/n) for odd positive n.
int kronecker_symbol(i64 a, i64 n);

// Smallest primitive root modulo an odd prime power (or 2, 4).
u64 primitive_root(u64 p, int e = 1);

struct PrimePowerModulus {
    u64 p = 3;
    int s = 1;
    u64 q = 3;

    PrimePowerModulus() = default;
    PrimePowerModulus(u64 p, int s);
    PrimePowerModulus with_exponent(int t) const { return PrimePowerModulus(p, t); }
};

// A choice function on the nonzero squares mod p: for each square r it
// names one of the two roots. Everything mod p^s is lifted from it.
class SqrtBranch {
public:
    explicit SqrtBranch(u64 p);  // root in [1, (p-1)/2]
    static SqrtBranch canonical(u64 p) { return SqrtBranch(p); }
    // Root in [(p+1)/2, p-1] instead: the other admissible choice.
    static SqrtBranch upper(u64 p);
    // Flip the canonical choice on the residues r where flip(r) is true.
    template <class F>
    static SqrtBranch flipped(u64 p, F flip) {
        SqrtBranch b(p);
        for (u64 r = 1; r < p; ++r)
            if (b.choice_[r] != 0 && flip(r)) b.choice_[r] = p - b.choice_[r];
        return b;
    }

    u64 p() const { return p_; }
    bool is_square(u64 r) const { return choice_[r % p_] != 0; }
    u64 choose(u64 r) const;

private:
    u64 p_;
    std::vector<u64> choice_;  // 0 on non-squares
};

// The root x_{1/2} mod p^s singled out by the branch. Throws
// std::invalid_argument if p | x and std::domain_error if x is a
// non-residue.
u64 padic_sqrt(i64 x, const PrimePowerModulus& q, const SqrtBranch& branch);

// x -> x_{1/2} for every unit square x mod p^s, built in O(p^s) by
// squaring the branch-compatible residues. root() is -1 off the squares.
class SqrtTable {
public:
    SqrtTable(const PrimePowerModulus& q, const SqrtBranch& branch);
    const PrimePowerModulus& modulus() const { return q_; }
    i64 root(i64 x) const { return root_[static_cast<std::size_t>(mod(x, static_cast<i64>(q_.q)))]; }
    bool is_unit_square(i64 x) const { return root(x) >= 0; }

private:
    PrimePowerModulus q_;
    std::vector<i64> root_;
};

// The root of a 1-unit x = 1 mod p that is itself 1 mod p.
u64 one_unit_sqrt(i64 x, const PrimePowerModulus& q);

// tau(A, p^s): sum_{x mod p^s} e(A x^2/p^s) = p^{s/2} tau(A, p^s).
cplx gauss_sign(i64 A, const PrimePowerModulus& q);

// Direct summation of the quadratic Gauss sum; the oracle for gauss_sign.
cplx quadratic_gauss_sum(i64 A, u64 q);

} // namespace kloosterlab
