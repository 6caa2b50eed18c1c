#include "kloosterlab/hecke.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

#include "kloosterlab/arith.hpp"
#include "ntt.hpp"

namespace kloosterlab {

namespace {

using detail::u32;

struct EisensteinPowers {
    int e4;
    int e6;
};

EisensteinPowers eisenstein_powers(int weight) {
    switch (weight) {
        case 12: return {0, 0};
        case 16: return {1, 0};
        case 18: return {0, 1};
        case 20: return {2, 0};
        case 22: return {1, 1};
        case 26: return {2, 1};
        default: break;
    }
    throw std::invalid_argument("unsupported weight " + std::to_string(weight) +
                                "; supported weights are 12, 16, 18, 20, 22, 26");
}

// 1 + c * sum sigma_k(n) x^n mod p, first len terms
std::vector<u32> eisenstein_mod(int k, i64 c, std::size_t len, u32 p) {
    std::vector<u32> s(len, 0);
    for (std::size_t d = 1; d < len; ++d) {
        u32 dk = static_cast<u32>(powmod(d, static_cast<u64>(k), p));
        for (std::size_t m = d; m < len; m += d) {
            u32 t = s[m] + dk;
            s[m] = t >= p ? t - p : t;
        }
    }
    u32 cm = static_cast<u32>(mod(c, static_cast<i64>(p)));
    for (std::size_t m = 1; m < len; ++m) s[m] = static_cast<u32>(static_cast<std::uint64_t>(s[m]) * cm % p);
    if (len) s[0] = 1;
    return s;
}

// prod (1 - x^n)^3 = sum_k (-1)^k (2k+1) x^{k(k+1)/2}
std::vector<u32> jacobi_cube_mod(std::size_t len, u32 p) {
    std::vector<u32> s(len, 0);
    for (std::uint64_t k = 0; k * (k + 1) / 2 < len; ++k) {
        std::uint64_t v = (2 * k + 1) % p;
        s[k * (k + 1) / 2] = static_cast<u32>(k % 2 ? (p - v) % p : v);
    }
    return s;
}

double coefficient_bits(int weight, u64 n_max) {
    // |a(n)| <= d(n) n^{(k-1)/2} <= 2 n^{k/2}; sign and a margin on top
    return 4.0 + 0.5 * weight * std::log2(static_cast<double>(std::max<u64>(n_max, 2)));
}

} // namespace

const std::vector<int>& supported_weights() {
    static const std::vector<int> w{12, 16, 18, 20, 22, 26};
    return w;
}

double Newform::lam(u64 n) const {
    if (n == 0 || n > n_max) throw std::out_of_range("Newform: coefficient table exhausted at n=" + std::to_string(n));
    return lambda[n];
}

const BigInt& Newform::coeff(u64 n) const {
    if (n == 0 || n > n_max) throw std::out_of_range("Newform: coefficient table exhausted at n=" + std::to_string(n));
    return a[n];
}

Newform compute_coefficients(int weight, u64 n_max) {
    auto ep = eisenstein_powers(weight);
    if (n_max < 1) throw std::invalid_argument("compute_coefficients: n_max must be positive");
    if (n_max > 8'000'000) throw std::invalid_argument("compute_coefficients: n_max above 8e6 is not supported");
    const std::size_t len = n_max;  // series in x = q, shifted by one: coefficient j is a(j+1)
    int logn = 1;
    while ((std::size_t{1} << logn) < 2 * len) ++logn;

    double bits = coefficient_bits(weight, n_max);
    std::vector<detail::NttPrime> primes;
    {
        auto cand = detail::ntt_primes(logn, 64);
        double have = 0;
        for (auto& pr : cand) {
            primes.push_back(pr);
            have += std::log2(static_cast<double>(pr.p));
            if (have > bits) break;
        }
        if (have <= bits) throw std::runtime_error("compute_coefficients: not enough primes for CRT");
    }

    std::vector<std::vector<u32>> res;
    for (auto& pr : primes) {
        detail::Ntt ntt(pr);
        auto j = jacobi_cube_mod(len, pr.p);
        auto d = ntt.square(j, len);  // J^2
        d = ntt.square(d, len);       // J^4
        d = ntt.square(d, len);       // J^8 = prod (1-x^n)^24
        if (ep.e4 > 0) {
            auto e4 = eisenstein_mod(3, 240, len, pr.p);
            for (int i = 0; i < ep.e4; ++i) d = ntt.multiply(d, e4, len);
        }
        if (ep.e6 > 0) {
            auto e6 = eisenstein_mod(5, -504, len, pr.p);
            for (int i = 0; i < ep.e6; ++i) d = ntt.multiply(d, e6, len);
        }
        res.push_back(std::move(d));
    }

    // Garner mixed-radix reconstruction, then symmetric lift
    const std::size_t k = primes.size();
    std::vector<std::vector<u64>> inv(k, std::vector<u64>(k, 0));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < j; ++i) inv[i][j] = mod_inverse(primes[i].p, primes[j].p);
    BigInt M = 1;
    for (auto& pr : primes) M *= pr.p;
    BigInt half = M / 2;

    Newform f;
    f.weight = weight;
    f.n_max = n_max;
    f.a.assign(n_max + 1, 0);
    f.lambda.assign(n_max + 1, 0.0);
    std::vector<u64> digit(k);
    for (std::size_t idx = 0; idx < len; ++idx) {
        for (std::size_t j = 0; j < k; ++j) {
            u64 pj = primes[j].p;
            u64 x = res[j][idx];
            for (std::size_t i = 0; i < j; ++i) {
                x = (x + pj - digit[i] % pj) % pj;
                x = x * inv[i][j] % pj;
            }
            digit[j] = x;
        }
        BigInt v = digit[k - 1];
        for (std::size_t j = k - 1; j-- > 0;) {
            v *= primes[j].p;
            v += digit[j];
        }
        if (v > half) v -= M;
        f.a[idx + 1] = std::move(v);
    }
    const double h = (weight - 1) / 2.0;
    for (u64 n = 1; n <= n_max; ++n) {
        double dn = static_cast<double>(n);
        // n^{(k-1)/2} = n^{(k-2)/2} sqrt(n) with k even
        f.lambda[n] = f.a[n].convert_to<double>() / (std::pow(dn, h - 0.5) * std::sqrt(dn));
    }
    return f;
}

// ---------------------------------------------------------------------------
// on-disk cache

namespace {

constexpr char kMagic[4] = {'K', 'L', 'C', 'F'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void put_varint(std::string& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<char>((v & 0x7f) | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<char>(v));
}

bool get_varint(const std::string& in, std::size_t& pos, std::uint64_t& v) {
    v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        if (pos >= in.size()) return false;
        auto c = static_cast<unsigned char>(in[pos++]);
        v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
        if (!(c & 0x80)) return true;
    }
    return false;
}

template <class T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::string& in, std::size_t pos) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

} // namespace

void write_cache(const Newform& f, const std::string& path) {
    std::string body;
    body.reserve(f.n_max * 20);
    std::vector<unsigned char> mag;
    for (u64 n = 1; n <= f.n_max; ++n) {
        const BigInt& v = f.a[n];
        mag.clear();
        BigInt absv = v < 0 ? BigInt(-v) : v;
        boost::multiprecision::export_bits(absv, std::back_inserter(mag), 8, false);
        // little-endian magnitude; header = (length << 1) | sign
        while (!mag.empty() && mag.back() == 0) mag.pop_back();
        put_varint(body, (static_cast<std::uint64_t>(mag.size()) << 1) | (v < 0 ? 1u : 0u));
        body.append(reinterpret_cast<const char*>(mag.data()), mag.size());
    }
    std::string head(kMagic, 4);
    put_le<std::uint32_t>(head, kVersion);
    put_le<std::uint32_t>(head, static_cast<std::uint32_t>(f.weight));
    put_le<std::uint64_t>(head, f.n_max);
    put_le<std::uint64_t>(head, fnv1a(body));
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("write_cache: cannot open " + tmp);
        os.write(head.data(), static_cast<std::streamsize>(head.size()));
        os.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!os) throw std::runtime_error("write_cache: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::shared_ptr<Newform> read_cache(const std::string& path, int weight, u64 n_max) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return nullptr;
    std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::size_t head_len = 4 + 4 + 4 + 8 + 8;
    if (all.size() < head_len || all.compare(0, 4, kMagic, 4) != 0) return nullptr;
    if (get_le<std::uint32_t>(all, 4) != kVersion) return nullptr;
    if (static_cast<int>(get_le<std::uint32_t>(all, 8)) != weight) return nullptr;
    u64 stored = get_le<std::uint64_t>(all, 12);
    std::uint64_t sum = get_le<std::uint64_t>(all, 20);
    if (stored < n_max) return nullptr;
    std::string body = all.substr(head_len);
    all.clear();
    if (fnv1a(body) != sum) return nullptr;
    auto f = std::make_shared<Newform>();
    f->weight = weight;
    f->n_max = stored;
    f->a.assign(stored + 1, 0);
    f->lambda.assign(stored + 1, 0.0);
    std::size_t pos = 0;
    const double h = (weight - 1) / 2.0;
    for (u64 n = 1; n <= stored; ++n) {
        std::uint64_t hdr;
        if (!get_varint(body, pos, hdr)) return nullptr;
        std::size_t len = static_cast<std::size_t>(hdr >> 1);
        if (pos + len > body.size()) return nullptr;
        BigInt v = 0;
        if (len)
            boost::multiprecision::import_bits(v, body.begin() + static_cast<std::ptrdiff_t>(pos),
                                               body.begin() + static_cast<std::ptrdiff_t>(pos + len), 8, false);
        pos += len;
        if (hdr & 1) v = -v;
        double dn = static_cast<double>(n);
        f->lambda[n] = v.convert_to<double>() / (std::pow(dn, h - 0.5) * std::sqrt(dn));
        f->a[n] = std::move(v);
    }
    return f;
}

std::string cache_path(int weight) {
    std::filesystem::path dir;
    if (const char* d = std::getenv("KLOOSTERLAB_CACHE_DIR"); d && *d) {
        dir = d;
    } else if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) {
        dir = std::filesystem::path(x) / "kloosterlab";
    } else if (const char* home = std::getenv("HOME"); home && *home) {
        dir = std::filesystem::path(home) / ".cache" / "kloosterlab";
    } else {
        dir = ".kloosterlab-cache";
    }
    return (dir / ("newform_w" + std::to_string(weight) + ".klcf")).string();
}

std::shared_ptr<const Newform> newform(int weight, u64 n_max) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const Newform>> memo;
    std::lock_guard<std::mutex> lock(mu);
    eisenstein_powers(weight);  // validates
    auto it = memo.find(weight);
    if (it != memo.end() && it->second->n_max >= n_max) return it->second;
    std::string path = cache_path(weight);
    std::shared_ptr<const Newform> f = read_cache(path, weight, n_max);
    if (!f) {
        // round up so that nearby requests reuse the table
        u64 target = std::max<u64>(n_max, 1u << 16);
        auto fresh = std::make_shared<Newform>(compute_coefficients(weight, target));
        try {
            write_cache(*fresh, path);
        } catch (const std::exception&) {
            // a read-only cache directory only costs recomputation
        }
        f = fresh;
    }
    memo[weight] = f;
    return f;
}

double hecke_composition(const Newform& f, u64 n, u64 m) {
    u64 g = gcd(n, m);
    double s = 0;
    for (u64 d : factorize(g).divisors()) {
        int mu = moebius(d);
        if (mu) s += mu * f.lam(n / d) * f.lam(m / d);
    }
    double direct = f.lam(n * m);
    if (std::abs(s - direct) > 1e-9 * std::max(1.0, std::abs(direct)))
        throw std::logic_error("hecke_composition: Hecke relation violated");
    return s;
}

EigenvalueStats eigenvalue_statistics(const Newform& f, u64 x, double alpha) {
    EigenvalueStats st;
    double rs = 0, comp = 0;
    for (u64 n = 1; n <= x; ++n) {
        double l = f.lam(n);
        // Kahan summation keeps the long sums reproducible
        double y = l * l - comp;
        double t = rs + y;
        comp = (t - rs) - y;
        rs = t;
        st.wilton_sum += l * e_real(alpha * static_cast<double>(n));
    }
    st.rankin_sum = rs;
    return st;
}

} // namespace kloosterlab
