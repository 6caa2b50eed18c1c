#pragma once

#include <memory>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kloosterlab/common.hpp"

namespace kloosterlab {

using BigInt = boost::multiprecision::cpp_int;

// The normalized cusp form of weight k on SL2(Z) for k in
// {12, 16, 18, 20, 22, 26}, where the space is one-dimensional.
struct Newform {
    int weight = 12;
    u64 n_max = 0;
    std::vector<BigInt> a;       // a[n], a[0] = 0
    std::vector<double> lambda;  // a(n) / n^{(k-1)/2}

    double lam(u64 n) const;
    const BigInt& coeff(u64 n) const;
};

const std::vector<int>& supported_weights();

// Exact Fourier coefficients by power-series arithmetic modulo several NTT
// primes followed by CRT: Delta = q prod (1-q^n)^24, times E4/E6 products.
Newform compute_coefficients(int weight, u64 n_max);

// Process-wide table, backed by an on-disk cache in
// $KLOOSTERLAB_CACHE_DIR (default ~/.cache/kloosterlab). Returns a table
// covering at least n_max.
std::shared_ptr<const Newform> newform(int weight, u64 n_max);

// Cache file I/O; read_cache returns nullptr on a missing file, a version
// or checksum mismatch, or a table shorter than n_max.
void write_cache(const Newform& f, const std::string& path);
std::shared_ptr<Newform> read_cache(const std::string& path, int weight, u64 n_max);
std::string cache_path(int weight);

// sum_{d | (n,m)} mu(d) lambda(n/d) lambda(m/d); throws std::logic_error if
// it differs from lambda(nm) by more than 1e-9 relative.
double hecke_composition(const Newform& f, u64 n, u64 m);

struct EigenvalueStats {
    double rankin_sum = 0.0;  // sum_{n <= x} lambda(n)^2
    cplx wilton_sum = 0.0;    // sum_{n <= x} lambda(n) e(alpha n)
};
EigenvalueStats eigenvalue_statistics(const Newform& f, u64 x, double alpha);

} // namespace kloosterlab
