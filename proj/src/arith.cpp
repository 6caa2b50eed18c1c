#include "kloosterlab/arith.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace kloosterlab {

u64 mulmod(u64 a, u64 b, u64 m) {
    return static_cast<u64>(static_cast<u128>(a) * b % m);
}

u64 powmod(u64 a, u64 e, u64 m) {
    u64 r = 1 % m;
    a %= m;
    while (e) {
        if (e & 1) r = mulmod(r, a, m);
        a = mulmod(a, a, m);
        e >>= 1;
    }
    return r;
}

u64 gcd(u64 a, u64 b) {
    while (b) {
        u64 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

u64 gcd_signed(i64 a, i64 b) {
    u64 ua = a < 0 ? static_cast<u64>(-(a + 1)) + 1 : static_cast<u64>(a);
    u64 ub = b < 0 ? static_cast<u64>(-(b + 1)) + 1 : static_cast<u64>(b);
    return gcd(ua, ub);
}

u64 ipow(u64 b, int e) {
    u64 r = 1;
    for (int i = 0; i < e; ++i) {
        if (b != 0 && r > UINT64_MAX / b) throw std::overflow_error("ipow overflow");
        r *= b;
    }
    return r;
}

int ord_p(i64 n, u64 p) {
    if (n == 0) return INT32_MAX;
    u64 m = n < 0 ? static_cast<u64>(-(n + 1)) + 1 : static_cast<u64>(n);
    int k = 0;
    while (m % p == 0) {
        m /= p;
        ++k;
    }
    return k;
}

bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    // deterministic for n < 3.3e24
    for (u64 a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        u64 x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

namespace {

// Brent's variant of Pollard rho; c runs through 1, 2, ... so results are
// deterministic.
u64 pollard_brent(u64 n) {
    if (n % 2 == 0) return 2;
    for (u64 c = 1;; ++c) {
        u64 y = 2, x = 2, g = 1, q = 1, ys = 2;
        const u64 m = 128;
        u64 r = 1;
        auto f = [&](u64 v) { return (mulmod(v, v, n) + c) % n; };
        do {
            x = y;
            for (u64 i = 0; i < r; ++i) y = f(y);
            u64 k = 0;
            do {
                ys = y;
                for (u64 i = 0; i < std::min(m, r - k); ++i) {
                    y = f(y);
                    q = mulmod(q, x > y ? x - y : y - x, n);
                }
                g = gcd(q, n);
                k += m;
            } while (k < r && g == 1);
            r *= 2;
        } while (g == 1);
        if (g == n) {
            do {
                ys = f(ys);
                g = gcd(x > ys ? x - ys : ys - x, n);
            } while (g == 1);
        }
        if (g != n) return g;
    }
}

void factor_into(u64 n, std::vector<u64>& out) {
    if (n == 1) return;
    if (is_prime(n)) {
        out.push_back(n);
        return;
    }
    u64 d = pollard_brent(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

} // namespace

Factorization factorize(u64 n) {
    if (n == 0) throw std::invalid_argument("factorize: n must be positive");
    if (n > (u64{1} << 63)) throw std::overflow_error("factorize: n exceeds 2^63");
    Factorization f;
    f.value = n;
    std::vector<u64> primes;
    for (u64 p = 2; p < 1000 && p * p <= n; ++p) {
        while (n % p == 0) {
            primes.push_back(p);
            n /= p;
        }
    }
    if (n > 1) factor_into(n, primes);
    std::sort(primes.begin(), primes.end());
    for (u64 p : primes) {
        if (!f.factors.empty() && f.factors.back().first == p)
            ++f.factors.back().second;
        else
            f.factors.emplace_back(p, 1);
    }
    return f;
}

u64 Factorization::rad() const {
    u64 r = 1;
    for (auto [p, e] : factors) r *= p;
    return r;
}

u64 Factorization::square_part() const {
    u64 r = 1;
    for (auto [p, e] : factors) r *= ipow(p, e / 2);
    return r;
}

int Factorization::ord(u64 p) const {
    for (auto [q, e] : factors)
        if (q == p) return e;
    return 0;
}

u64 Factorization::part_supported_on(u64 m) const {
    u64 r = 1;
    for (auto [p, e] : factors)
        if (m % p == 0) r *= ipow(p, e);
    return r;
}

u64 Factorization::num_divisors() const {
    u64 r = 1;
    for (auto [p, e] : factors) r *= static_cast<u64>(e + 1);
    return r;
}

u64 Factorization::euler_phi() const {
    u64 r = 1;
    for (auto [p, e] : factors) r *= (p - 1) * ipow(p, e - 1);
    return r;
}

int Factorization::moebius() const {
    for (auto [p, e] : factors)
        if (e > 1) return 0;
    return factors.size() % 2 ? -1 : 1;
}

bool Factorization::is_cube_free() const {
    for (auto [p, e] : factors)
        if (e >= 3) return false;
    return true;
}

std::vector<u64> Factorization::divisors() const {
    std::vector<u64> ds{1};
    for (auto [p, e] : factors) {
        std::size_t n = ds.size();
        u64 pk = 1;
        for (int k = 1; k <= e; ++k) {
            pk *= p;
            for (std::size_t i = 0; i < n; ++i) ds.push_back(ds[i] * pk);
        }
    }
    std::sort(ds.begin(), ds.end());
    return ds;
}

u64 euler_phi(u64 n) { return factorize(n).euler_phi(); }
int moebius(u64 n) { return factorize(n).moebius(); }
u64 divisor_count(u64 n) { return factorize(n).num_divisors(); }

u64 mod_inverse(i64 a, u64 m) {
    if (m == 0) throw std::invalid_argument("mod_inverse: zero modulus");
    if (m == 1) return 0;
    i128 r0 = static_cast<i128>(m), r1 = mod(static_cast<i128>(a), static_cast<i64>(m));
    i128 s0 = 0, s1 = 1;
    while (r1 != 0) {
        i128 qt = r0 / r1;
        i128 t = r0 - qt * r1;
        r0 = r1;
        r1 = t;
        t = s0 - qt * s1;
        s0 = s1;
        s1 = t;
    }
    if (r0 != 1)
        throw std::domain_error("mod_inverse: " + std::to_string(a) + " is not invertible mod " +
                                std::to_string(m));
    return static_cast<u64>(mod(s0, static_cast<i64>(m)));
}

int kronecker_symbol(i64 a, i64 n) {
    if (n <= 0 || n % 2 == 0) throw std::invalid_argument("kronecker_symbol: n must be odd and positive");
    a = mod(a, n);
    int t = 1;
    while (a != 0) {
        while (a % 2 == 0) {
            a /= 2;
            i64 r = n % 8;
            if (r == 3 || r == 5) t = -t;
        }
        std::swap(a, n);
        if (a % 4 == 3 && n % 4 == 3) t = -t;
        a %= n;
    }
    return n == 1 ? t : 0;
}

u64 primitive_root(u64 p, int e) {
    if (p == 2) {
        if (e <= 2) return e == 1 ? 1 : 3;
        throw std::invalid_argument("primitive_root: 2^e has none for e > 2");
    }
    u64 phi_p = p - 1;
    auto fac = factorize(phi_p);
    u64 q = ipow(p, e);
    for (u64 g = 2; g < p; ++g) {
        bool ok = true;
        for (auto [r, k] : fac.factors)
            if (powmod(g, phi_p / r, p) == 1) {
                ok = false;
                break;
            }
        if (!ok) continue;
        if (e >= 2 && powmod(g, phi_p, p * p) == 1) g += p;  // g + p generates mod p^2
        return g % q;
    }
    throw std::logic_error("primitive_root: none found");
}

PrimePowerModulus::PrimePowerModulus(u64 p_, int s_) : p(p_), s(s_) {
    if (p_ < 3 || !is_prime(p_)) throw std::invalid_argument("PrimePowerModulus: p must be an odd prime");
    if (s_ < 1) throw std::invalid_argument("PrimePowerModulus: s must be >= 1");
    q = ipow(p_, s_);
    if (q > (u64{1} << 62)) throw std::overflow_error("PrimePowerModulus: p^s too large");
}

SqrtBranch::SqrtBranch(u64 p) : p_(p), choice_(p, 0) {
    if (p < 3 || !is_prime(p)) throw std::invalid_argument("SqrtBranch: p must be an odd prime");
    for (u64 x = 1; x <= (p - 1) / 2; ++x) choice_[x * x % p] = x;
}

SqrtBranch SqrtBranch::upper(u64 p) {
    return flipped(p, [](u64) { return true; });
}

u64 SqrtBranch::choose(u64 r) const {
    r %= p_;
    if (r == 0) throw std::invalid_argument("SqrtBranch: zero has no unit root");
    if (choice_[r] == 0) throw std::domain_error("SqrtBranch: non-residue");
    return choice_[r];
}

u64 padic_sqrt(i64 x, const PrimePowerModulus& q, const SqrtBranch& branch) {
    if (branch.p() != q.p) throw std::invalid_argument("padic_sqrt: branch prime mismatch");
    u64 xr = static_cast<u64>(mod(static_cast<i128>(x), static_cast<i64>(q.q)));
    if (xr % q.p == 0) throw std::invalid_argument("padic_sqrt: x must be coprime to p");
    u64 r = branch.choose(xr % q.p);
    // Newton: r <- r - (r^2 - x)/(2r), doubling the precision each step
    u64 pk = q.p;
    while (pk < q.q) {
        pk = (pk > q.q / pk) ? q.q : pk * pk;
        u64 xm = xr % pk;
        u64 r2 = mulmod(r, r, pk);
        u64 diff = (r2 + pk - xm) % pk;
        u64 inv2r = mod_inverse(static_cast<i64>(mulmod(2, r, pk)), pk);
        r = (r + pk - mulmod(diff, inv2r, pk)) % pk;
    }
    return r % q.q;
}

u64 one_unit_sqrt(i64 x, const PrimePowerModulus& q) {
    if (mod(static_cast<i128>(x), static_cast<i64>(q.p)) != 1)
        throw std::invalid_argument("one_unit_sqrt: x must be 1 mod p");
    return padic_sqrt(x, q, SqrtBranch(q.p));  // canonical choice(1) = 1
}

SqrtTable::SqrtTable(const PrimePowerModulus& q, const SqrtBranch& branch) : q_(q), root_(q.q, -1) {
    if (branch.p() != q.p) throw std::invalid_argument("SqrtTable: branch prime mismatch");
    for (u64 y = 1; y < q.q; ++y) {
        u64 y0 = y % q.p;
        if (y0 == 0) continue;
        u64 sq = mulmod(y, y, q.q);
        if (branch.choose(sq % q.p) == y0) root_[sq] = static_cast<i64>(y);
    }
}

cplx gauss_sign(i64 A, const PrimePowerModulus& q) {
    if (q.p % 2 == 0) throw std::invalid_argument("gauss_sign: p must be odd");
    if (mod(A, static_cast<i64>(q.p)) == 0) throw std::invalid_argument("gauss_sign: A must be coprime to p");
    if (q.s % 2 == 0) return {1.0, 0.0};
    double leg = kronecker_symbol(A, static_cast<i64>(q.p));
    if (q.p % 4 == 1) return {leg, 0.0};
    return {0.0, leg};
}

cplx quadratic_gauss_sum(i64 A, u64 q) {
    cplx s = 0;
    for (u64 x = 0; x < q; ++x) {
        i64 num = static_cast<i64>(mulmod(mulmod(x, x, q), static_cast<u64>(mod(A, static_cast<i64>(q))), q));
        s += e_frac(num, static_cast<i64>(q));
    }
    return s;
}

} // namespace kloosterlab
