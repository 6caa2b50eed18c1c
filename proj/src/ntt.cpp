#include "ntt.hpp"

#include <stdexcept>

#include "kloosterlab/arith.hpp"

namespace kloosterlab::detail {

std::vector<NttPrime> ntt_primes(int k, std::size_t count) {
    std::vector<NttPrime> out;
    const std::uint64_t step = std::uint64_t{1} << k;
    for (std::uint64_t c = 1; out.size() < count; ++c) {
        std::uint64_t p = c * step + 1;
        if (p >= (std::uint64_t{1} << 31)) break;
        if (!is_prime(p)) continue;
        int t = 0;
        std::uint64_t m = p - 1;
        while (m % 2 == 0) {
            m /= 2;
            ++t;
        }
        out.push_back({static_cast<u32>(p), static_cast<u32>(primitive_root(p)), t});
    }
    return out;
}

Ntt::Ntt(NttPrime prime) : p_(prime.p), g_(prime.g), two_adic_(prime.two_adic) {
    // ninv = -p^{-1} mod 2^32 by Newton iteration
    u32 inv = p_;
    for (int i = 0; i < 5; ++i) inv *= 2 - p_ * inv;
    ninv_ = static_cast<u32>(0u - inv);
    std::uint64_t r = (std::uint64_t{1} << 32) % p_;
    r2_ = static_cast<u32>(r * r % p_);
}

u32 Ntt::pow_mont(u32 b, std::uint64_t e) const {
    u32 r = to_mont(1);
    while (e) {
        if (e & 1) r = mul(r, b);
        b = mul(b, b);
        e >>= 1;
    }
    return r;
}

void Ntt::transform(std::vector<u32>& a, bool inverse) const {
    const std::size_t n = a.size();
    int logn = 0;
    while ((std::size_t{1} << logn) < n) ++logn;
    if (logn > two_adic_) throw std::invalid_argument("Ntt: transform too long for prime");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    std::vector<u32> w(n / 2 + 1);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        u32 root = pow_mont(to_mont(g_), (p_ - 1) / len);
        if (inverse) root = pow_mont(root, p_ - 2);
        const std::size_t half = len / 2;
        w[0] = to_mont(1);
        for (std::size_t i = 1; i < half; ++i) w[i] = mul(w[i - 1], root);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                u32 u = a[i + j];
                u32 v = mul(a[i + j + half], w[j]);
                u32 s = u + v;
                a[i + j] = s >= p_ ? s - p_ : s;
                a[i + j + half] = u >= v ? u - v : u + p_ - v;
            }
        }
    }
    if (inverse) {
        u32 ninv = pow_mont(to_mont(static_cast<u32>(n % p_)), p_ - 2);
        for (auto& x : a) x = mul(x, ninv);
    }
}

std::vector<u32> Ntt::multiply(const std::vector<u32>& a, const std::vector<u32>& b, std::size_t len) const {
    std::size_t need = std::min(a.size(), len) + std::min(b.size(), len);
    std::size_t n = 1;
    while (n < need) n <<= 1;
    std::vector<u32> fa(n, 0), fb(n, 0);
    for (std::size_t i = 0; i < std::min(a.size(), len); ++i) fa[i] = to_mont(a[i] % p_);
    for (std::size_t i = 0; i < std::min(b.size(), len); ++i) fb[i] = to_mont(b[i] % p_);
    transform(fa, false);
    transform(fb, false);
    for (std::size_t i = 0; i < n; ++i) fa[i] = mul(fa[i], fb[i]);
    fb = {};
    transform(fa, true);
    fa.resize(len);
    for (auto& x : fa) x = from_mont(x);
    return fa;
}

std::vector<u32> Ntt::square(const std::vector<u32>& a, std::size_t len) const {
    std::size_t need = 2 * std::min(a.size(), len);
    std::size_t n = 1;
    while (n < need) n <<= 1;
    std::vector<u32> fa(n, 0);
    for (std::size_t i = 0; i < std::min(a.size(), len); ++i) fa[i] = to_mont(a[i] % p_);
    transform(fa, false);
    for (auto& x : fa) x = mul(x, x);
    transform(fa, true);
    fa.resize(len);
    for (auto& x : fa) x = from_mont(x);
    return fa;
}

} // namespace kloosterlab::detail
