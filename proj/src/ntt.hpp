#pragma once

// Number-theoretic transforms over 31-bit primes p = c*2^k + 1 with
// Montgomery multiplication. Internal to hecke_forms.

#include <cstdint>
#include <vector>

namespace kloosterlab::detail {

using u32 = std::uint32_t;

struct NttPrime {
    u32 p;
    u32 g;  // primitive root
    int two_adic;
};

// Primes below 2^31 with 2^k | p - 1, smallest first; at most count, fewer
// when the range runs out.
std::vector<NttPrime> ntt_primes(int k, std::size_t count);

class Ntt {
public:
    explicit Ntt(NttPrime prime);

    u32 p() const { return p_; }
    // (a * b) truncated to the first `len` coefficients, everything mod p
    std::vector<u32> multiply(const std::vector<u32>& a, const std::vector<u32>& b, std::size_t len) const;
    std::vector<u32> square(const std::vector<u32>& a, std::size_t len) const;

private:
    u32 p_, g_, ninv_, r2_;
    int two_adic_;

    u32 reduce(std::uint64_t x) const {
        u32 m = static_cast<u32>(x) * ninv_;
        std::uint64_t t = (x + static_cast<std::uint64_t>(m) * p_) >> 32;
        return static_cast<u32>(t >= p_ ? t - p_ : t);
    }
    u32 mul(u32 a, u32 b) const { return reduce(static_cast<std::uint64_t>(a) * b); }
    u32 to_mont(u32 a) const { return mul(a, r2_); }
    u32 from_mont(u32 a) const { return reduce(a); }
    u32 pow_mont(u32 base_mont, std::uint64_t e) const;
    void transform(std::vector<u32>& a, bool inverse) const;
};

} // namespace kloosterlab::detail
