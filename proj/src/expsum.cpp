#include "kloosterlab/expsum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include <fftw3.h>

namespace kloosterlab {

namespace {

constexpr u64 kMaxCompleteModulus = 10'000'000;

u64 umod(i64 x, u64 q) { return static_cast<u64>(mod(x, static_cast<i64>(q))); }

// Closed form of S(m, n; p^s) from a root r of mn mod p^s. The sum over
// both signs is invariant under r -> -r, so any root will do.
double closed_form_value(u64 r, u64 p, int s, u64 q) {
    const double amp = std::pow(static_cast<double>(p), 0.5 * s);
    const double angle = kTwoPi * static_cast<double>(2 * r % q) / static_cast<double>(q);
    if (s % 2 == 0) return 2.0 * amp * std::cos(angle);
    int leg = kronecker_symbol(static_cast<i64>(r % p), static_cast<i64>(p));
    if (p % 4 == 1) return 2.0 * amp * leg * std::cos(angle);
    return -2.0 * amp * leg * std::sin(angle);
}

double direct_real(u64 m, u64 n, u64 q) {
    double acc = 0.0;
    for (u64 x = (q == 1 ? 0 : 1); x < q; ++x) {
        if (gcd(x, q) != 1) continue;
        u64 xb = q == 1 ? 0 : mod_inverse(static_cast<i64>(x), q);
        u64 t = static_cast<u64>((static_cast<u128>(m) * x + static_cast<u128>(n) * xb) % q);
        acc += std::cos(kTwoPi * static_cast<double>(t) / static_cast<double>(q));
    }
    return acc;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Forward DFT sum_j x_j e(-jk/n).
std::vector<cplx> dft(const std::vector<cplx>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<cplx> in(x), out(x.size());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

// sum_{k in (-r/2, r/2]} |c_hat(k)| min(M/r, 1/|k|), the completion weight.
double completion_weight(const std::vector<cplx>& chat, double M) {
    const i64 r = static_cast<i64>(chat.size());
    double acc = 0.0;
    for (i64 k = 0; k < r; ++k) {
        i64 kk = k <= r / 2 ? k : k - r;
        double w = kk == 0 ? M / r : std::min(M / r, 1.0 / std::abs(static_cast<double>(kk)));
        acc += std::abs(chat[k]) * w;
    }
    return acc;
}

// S^eps(x, n; q) for every x mod q.
std::vector<cplx> eps_table(int eps, i64 n, const PrimePowerModulus& q, const SqrtTable& roots) {
    std::vector<cplx> t(q.q, 0.0);
    const double amp = std::pow(static_cast<double>(q.p), 0.5 * q.s);
    for (u64 x = 0; x < q.q; ++x) {
        i64 mn = mod(static_cast<i128>(x) * n, static_cast<i64>(q.q));
        if (mn % static_cast<i64>(q.p) == 0) continue;
        i64 r = roots.root(mn);
        if (r < 0) continue;
        i64 er = eps * r;
        t[x] = amp * gauss_sign(er, q) * e_frac(2 * er, static_cast<i64>(q.q));
    }
    return t;
}

void check_sigma_modulus(u64 q) {
    if (q == 0) throw std::invalid_argument("sigma: modulus must be positive");
    if (q > kMaxCompleteModulus) throw std::invalid_argument("sigma: modulus above 10^7 is out of scope");
}

cplx sigma_full_prime_power(i64 n1, i64 n2, i64 a, i64 k, u64 q) {
    KloostermanEvaluator kl(q);
    std::vector<double> k1(q), k2(q);
    for (u64 x = 0; x < q; ++x) {
        k1[x] = kl(static_cast<i64>(x), n1);
        k2[x] = n1 == n2 ? k1[x] : kl(static_cast<i64>(x), n2);
    }
    const u64 ar = umod(a, q), kr = umod(k, q);
    cplx acc = 0.0;
    for (u64 m = 0; m < q; ++m) {
        u64 ma = (m + ar) % q;
        if (gcd(m, q) != 1 || gcd(ma, q) != 1) continue;
        double w = k1[ma] * k2[ma] * k1[m] * k2[m];
        if (w == 0.0) continue;
        acc += w * e_frac(-static_cast<i64>(static_cast<u128>(kr) * m % q), static_cast<i64>(q));
    }
    return acc;
}

cplx sigma_eps_sum(i64 n1, i64 n2, i64 a, i64 k, const PrimePowerModulus& q, const SqrtBranch& branch,
                   const std::vector<std::array<int, 4>>& eps_set) {
    SqrtTable roots(q, branch);
    std::vector<cplx> t1[2], t2[2];
    for (int e = 0; e < 2; ++e) {
        t1[e] = eps_table(e == 0 ? 1 : -1, n1, q, roots);
        t2[e] = eps_table(e == 0 ? 1 : -1, n2, q, roots);
    }
    auto idx = [](int e) { return e == 1 ? 0 : 1; };
    const u64 Q = q.q, ar = umod(a, Q), kr = umod(k, Q);
    cplx acc = 0.0;
    for (u64 m = 0; m < Q; ++m) {
        u64 ma = (m + ar) % Q;
        if (m % q.p == 0 || ma % q.p == 0) continue;
        cplx inner = 0.0;
        for (const auto& e : eps_set)
            inner += t1[idx(e[0])][ma] * std::conj(t1[idx(e[1])][m]) * t2[idx(e[2])][ma] * std::conj(t2[idx(e[3])][m]);
        if (inner == 0.0) continue;
        acc += inner * e_frac(-static_cast<i64>(static_cast<u128>(kr) * m % Q), static_cast<i64>(Q));
    }
    return acc;
}

std::vector<std::array<int, 4>> all_eps() {
    std::vector<std::array<int, 4>> out;
    for (int b = 0; b < 16; ++b) out.push_back({b & 1 ? -1 : 1, b & 2 ? -1 : 1, b & 4 ? -1 : 1, b & 8 ? -1 : 1});
    return out;
}

std::vector<std::array<int, 4>> sharp_eps() {
    std::vector<std::array<int, 4>> out;
    for (int e1 : {1, -1})
        for (int e3 : {1, -1}) out.push_back({e1, e1, e3, e3});
    return out;
}

cplx sigma_reduced_table(i64 A, i64 B, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtTable& roots) {
    const i64 Q = static_cast<i64>(q.q);
    const i64 Ar = mod(A, Q), Br = mod(B, Q), ar = mod(a, Q), kr = mod(k, Q), ur = mod(u, Q);
    cplx acc = 0.0;
    for (i64 m = 0; m < Q; ++m) {
        i64 ma = (m + ar) % Q;
        if (m % static_cast<i64>(q.p) == 0 || ma % static_cast<i64>(q.p) == 0) continue;
        i64 x = roots.root(static_cast<i64>(static_cast<i128>(ma) * ur % Q));
        i64 y = roots.root(static_cast<i64>(static_cast<i128>(m) * ur % Q));
        if (x < 0 || y < 0) continue;
        i128 f = 2 * static_cast<i128>(Ar) * x - 2 * static_cast<i128>(Br) * y - static_cast<i128>(kr) * m;
        acc += e_frac(mod(f, Q), Q);
    }
    return acc;
}

u64 admissible_count(i64 a, const PrimePowerModulus& q, i64 u, const SqrtTable& roots) {
    const i64 Q = static_cast<i64>(q.q), ar = mod(a, Q), ur = mod(u, Q);
    u64 count = 0;
    for (i64 m = 0; m < Q; ++m) {
        i64 ma = (m + ar) % Q;
        if (m % static_cast<i64>(q.p) == 0 || ma % static_cast<i64>(q.p) == 0) continue;
        if (roots.is_unit_square(static_cast<i64>(static_cast<i128>(ma) * ur % Q)) &&
            roots.is_unit_square(static_cast<i64>(static_cast<i128>(m) * ur % Q)))
            ++count;
    }
    return count;
}

void require_stationary_prime(const PrimePowerModulus& q, const char* who) {
    if (q.p <= 3) throw std::invalid_argument(std::string(who) + ": requires p > 3");
    if (q.q > kMaxCompleteModulus) throw std::invalid_argument(std::string(who) + ": modulus above 10^7");
}

} // namespace

// ---------------------------------------------------------------------------

double kloosterman(i64 m, i64 n, u64 c) {
    if (c == 0) throw std::invalid_argument("kloosterman: modulus must be positive");
    const i64 C = static_cast<i64>(c);
    const u64 mr = umod(m, c), nr = umod(n, c);
    cplx acc = 0.0;
    for (u64 x = 0; x < c; ++x) {
        if (gcd(x, c) != 1) continue;
        u64 xb = mod_inverse(static_cast<i64>(x), c);
        u64 t = static_cast<u64>((static_cast<u128>(mr) * x + static_cast<u128>(nr) * xb) % c);
        acc += e_frac(static_cast<i64>(t), C);
    }
    if (std::abs(acc.imag()) > 1e-8 * static_cast<double>(c))
        throw std::logic_error("kloosterman: imaginary part does not vanish");
    return acc.real();
}

KloostermanEvaluator::KloostermanEvaluator(u64 c) : c_(c) {
    if (c == 0) throw std::invalid_argument("KloostermanEvaluator: modulus must be positive");
    for (auto [p, s] : factorize(c).factors) {
        Part part;
        part.p = p;
        part.s = s;
        part.q = ipow(p, s);
        part.cofactor_inv = part.q == 1 ? 0 : mod_inverse(static_cast<i64>((c / part.q) % part.q), part.q);
        part.closed_form = p > 3 && s >= 2;
        if (part.closed_form) {
            SqrtTable roots(PrimePowerModulus(p, s), SqrtBranch(p));
            part.sqrt_of.resize(part.q);
            for (u64 x = 0; x < part.q; ++x) part.sqrt_of[x] = roots.root(static_cast<i64>(x));
        } else {
            part.inv.assign(part.q, 0);
            for (u64 x = 1; x < part.q; ++x)
                if (x % p != 0) part.inv[x] = static_cast<std::uint32_t>(mod_inverse(static_cast<i64>(x), part.q));
            part.cosine.resize(part.q);
            for (u64 j = 0; j < part.q; ++j)
                part.cosine[j] = std::cos(kTwoPi * static_cast<double>(j) / static_cast<double>(part.q));
        }
        parts_.push_back(std::move(part));
    }
}

double KloostermanEvaluator::part_value(const Part& part, i64 m, i64 n) const {
    const u64 q = part.q, p = part.p;
    // S(m, n; c) = prod over parts of S(Q' m, Q' n; q) with Q' = (c/q)^{-1}
    u64 mq = static_cast<u64>(static_cast<u128>(umod(m, q)) * part.cofactor_inv % q);
    u64 nq = static_cast<u64>(static_cast<u128>(umod(n, q)) * part.cofactor_inv % q);
    if (part.closed_form) {
        if (mq % p == 0 && nq % p == 0) return direct_real(mq, nq, q);
        if (mq % p == 0 || nq % p == 0) return 0.0;
        u64 t = static_cast<u64>(static_cast<u128>(mq) * nq % q);
        i64 r = part.sqrt_of[t];
        if (r < 0) return 0.0;
        return closed_form_value(static_cast<u64>(r), p, part.s, q);
    }
    double acc = 0.0;
    if (q == 1) return 1.0;
    for (u64 x = 1; x < q; ++x) {
        std::uint32_t xb = part.inv[x];
        if (xb == 0) continue;
        acc += part.cosine[(mq * x + nq * xb) % q];
    }
    return acc;
}

double KloostermanEvaluator::operator()(i64 m, i64 n) const {
    double v = 1.0;
    for (const auto& part : parts_) {
        v *= part_value(part, m, n);
        if (v == 0.0) break;
    }
    return v;
}

double kloosterman_explicit(i64 m, i64 n, const PrimePowerModulus& q, const SqrtBranch& branch) {
    if (q.s < 2 || q.p == 2) throw std::invalid_argument("kloosterman_explicit: needs odd p and s >= 2");
    if (umod(m, q.p) == 0) throw std::invalid_argument("kloosterman_explicit: p must not divide m");
    if (umod(n, q.p) == 0) return 0.0;
    i64 mn = mod(static_cast<i128>(m) * n, static_cast<i64>(q.q));
    if (!branch.is_square(static_cast<u64>(mn) % q.p)) return 0.0;
    i64 r = static_cast<i64>(padic_sqrt(mn, q, branch));
    const i64 Q = static_cast<i64>(q.q);
    cplx acc = gauss_sign(r, q) * e_frac(2 * r, Q) + gauss_sign(-r, q) * e_frac(-2 * r, Q);
    return std::pow(static_cast<double>(q.p), 0.5 * q.s) * acc.real();
}

cplx kloosterman_eps(int eps, i64 m, i64 n, const PrimePowerModulus& q, const SqrtBranch& branch) {
    if (q.s < 2) throw std::invalid_argument("kloosterman_eps: needs s >= 2");
    if (eps != 1 && eps != -1) throw std::invalid_argument("kloosterman_eps: eps must be +1 or -1");
    i64 mn = mod(static_cast<i128>(m) * n, static_cast<i64>(q.q));
    if (mn % static_cast<i64>(q.p) == 0 || !branch.is_square(static_cast<u64>(mn) % q.p)) return 0.0;
    i64 r = eps * static_cast<i64>(padic_sqrt(mn, q, branch));
    return std::pow(static_cast<double>(q.p), 0.5 * q.s) * gauss_sign(r, q) * e_frac(2 * r, static_cast<i64>(q.q));
}

double kloosterman_split(i64 m, i64 n, u64 r1, u64 r2) {
    if (r1 == 0 || r2 == 0) throw std::invalid_argument("kloosterman_split: moduli must be positive");
    if (gcd(r1, r2) != 1) throw std::invalid_argument("kloosterman_split: moduli must be coprime");
    const i64 r2b = r1 == 1 ? 0 : static_cast<i64>(mod_inverse(static_cast<i64>(r2 % r1), r1));
    const i64 r1b = r2 == 1 ? 0 : static_cast<i64>(mod_inverse(static_cast<i64>(r1 % r2), r2));
    double f1 = kloosterman(mod(static_cast<i128>(r2b) * m, static_cast<i64>(r1)),
                            mod(static_cast<i128>(r2b) * n, static_cast<i64>(r1)), r1);
    double f2 = kloosterman(mod(static_cast<i128>(r1b) * m, static_cast<i64>(r2)),
                            mod(static_cast<i128>(r1b) * n, static_cast<i64>(r2)), r2);
    double whole = kloosterman(m, n, r1 * r2);
    double split = f1 * f2;
    if (std::abs(whole - split) > 1e-8 * std::max(1.0, std::abs(whole)))
        throw std::logic_error("kloosterman_split: twisted multiplicativity violated");
    return split;
}

// ---------------------------------------------------------------------------

u64 square_class_rep(i64 n, u64 p) {
    if (umod(n, p) == 0) throw std::invalid_argument("square_class_rep: n must be a unit");
    int target = kronecker_symbol(n, static_cast<i64>(p));
    for (u64 u = 1; u < p; ++u)
        if (kronecker_symbol(static_cast<i64>(u), static_cast<i64>(p)) == target) return u;
    throw std::logic_error("square_class_rep: no representative");
}

cplx sigma_complete(const CompleteSumSpec& spec, const SqrtBranch* branch) {
    check_sigma_modulus(spec.q);
    auto fac = factorize(spec.q);
    if (spec.variant == SigmaVariant::Full) {
        if (fac.factors.size() <= 1) return sigma_full_prime_power(spec.n1, spec.n2, spec.a, spec.k, spec.q);
        cplx prod = 1.0;
        for (auto [p, s] : fac.factors) {
            const u64 qj = ipow(p, s);
            const i64 Qb = static_cast<i64>(mod_inverse(static_cast<i64>((spec.q / qj) % qj), qj));
            const i64 Qb2 = mod(static_cast<i128>(Qb) * Qb, static_cast<i64>(qj));
            prod *= sigma_full_prime_power(mod(static_cast<i128>(Qb2) * spec.n1, static_cast<i64>(qj)),
                                           mod(static_cast<i128>(Qb2) * spec.n2, static_cast<i64>(qj)),
                                           mod(spec.a, static_cast<i64>(qj)),
                                           mod(static_cast<i128>(Qb) * spec.k, static_cast<i64>(qj)), qj);
            if (prod == 0.0) break;
        }
        return prod;
    }
    if (fac.factors.size() != 1 || fac.factors[0].first == 2 || fac.factors[0].second < 2)
        throw std::invalid_argument("sigma_complete: decomposed variants need q = p^s, p odd, s >= 2");
    PrimePowerModulus q(fac.factors[0].first, fac.factors[0].second);
    if (umod(spec.n1, q.p) == 0 || umod(spec.n2, q.p) == 0 ||
        kronecker_symbol(mod(static_cast<i128>(spec.n1) * spec.n2, static_cast<i64>(q.p)), static_cast<i64>(q.p)) != 1)
        throw std::invalid_argument("sigma_complete: n1 n2 must be a unit square mod p");
    SqrtBranch canonical(q.p);
    const SqrtBranch& br = branch ? *branch : canonical;
    if (br.p() != q.p) throw std::invalid_argument("sigma_complete: branch prime mismatch");
    if (spec.variant == SigmaVariant::Sharp) {
        if (umod(spec.a, q.p) != 0) throw std::invalid_argument("sigma_complete: the sharp sum needs p | a");
        return sigma_eps_sum(spec.n1, spec.n2, spec.a, spec.k, q, br, sharp_eps());
    }
    for (int e : spec.eps)
        if (e != 1 && e != -1) throw std::invalid_argument("sigma_complete: eps entries must be +-1");
    return sigma_eps_sum(spec.n1, spec.n2, spec.a, spec.k, q, br, {spec.eps});
}

cplx sigma_direct(i64 n1, i64 n2, i64 a, i64 k, u64 q) {
    check_sigma_modulus(q);
    std::vector<double> k1(q), k2(q);
    for (u64 x = 0; x < q; ++x) {
        k1[x] = kloosterman(static_cast<i64>(x), n1, q);
        k2[x] = kloosterman(static_cast<i64>(x), n2, q);
    }
    const u64 ar = umod(a, q), kr = umod(k, q);
    cplx acc = 0.0;
    for (u64 m = 0; m < q; ++m) {
        u64 ma = (m + ar) % q;
        if (gcd(m, q) != 1 || gcd(ma, q) != 1) continue;
        acc += k1[ma] * k2[ma] * k1[m] * k2[m] *
               std::exp(cplx(0.0, -kTwoPi * static_cast<double>(static_cast<u128>(kr) * m % q) / static_cast<double>(q)));
    }
    return acc;
}

cplx sigma_reduced(i64 A, i64 B, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch) {
    require_stationary_prime(q, "sigma_reduced");
    if (umod(u, q.p) == 0) throw std::invalid_argument("sigma_reduced: u must be a unit");
    return sigma_reduced_table(A, B, a, k, q, u, SqrtTable(q, branch));
}

std::pair<i64, i64> decomposition_params(const std::array<int, 4>& eps, i64 n1, i64 n2, i64 u,
                                         const PrimePowerModulus& q, const SqrtBranch& branch) {
    const i64 Q = static_cast<i64>(q.q);
    const i64 ub = static_cast<i64>(mod_inverse(u, q.q));
    const i64 r1 = static_cast<i64>(padic_sqrt(mod(static_cast<i128>(n1) * ub, Q), q, branch));
    const i64 r2 = static_cast<i64>(padic_sqrt(mod(static_cast<i128>(n2) * ub, Q), q, branch));
    return {mod(static_cast<i128>(eps[0]) * r1 + static_cast<i128>(eps[2]) * r2, Q),
            mod(static_cast<i128>(eps[1]) * r1 + static_cast<i128>(eps[3]) * r2, Q)};
}

int decomposition_sign(const std::array<int, 4>& eps, const PrimePowerModulus& q) {
    if (q.s % 2 == 0) return 1;
    int prod = eps[0] * eps[1] * eps[2] * eps[3];
    return prod == 1 ? 1 : kronecker_symbol(-1, static_cast<i64>(q.p));
}

BoundReport decomposition_audit(i64 n1, i64 n2, i64 a, i64 k, const PrimePowerModulus& q, const SqrtBranch& branch) {
    require_stationary_prime(q, "decomposition_audit");
    if (q.s < 2) throw std::invalid_argument("decomposition_audit: needs s >= 2");
    const double tol = 1e-6 * std::pow(static_cast<double>(q.q), 2.5);
    CompleteSumSpec spec{n1, n2, a, k, q.q, SigmaVariant::Full, {1, 1, 1, 1}};
    const cplx full = sigma_complete(spec);
    const bool degenerate = umod(n1, q.p) == 0 || umod(n2, q.p) == 0 ||
                            kronecker_symbol(mod(static_cast<i128>(n1) * n2, static_cast<i64>(q.p)),
                                             static_cast<i64>(q.p)) != 1;
    auto report = [&](double residual, bool deg) {
        auto r = BoundReport::make("decomposition", residual, tol);
        r.params = {{"p", double(q.p)}, {"s", double(q.s)}, {"n1", double(n1)}, {"n2", double(n2)},
                    {"a", double(a)},   {"k", double(k)},   {"degenerate", deg ? 1.0 : 0.0}};
        return r;
    };
    if (degenerate) return report(std::abs(full), true);

    const i64 u = static_cast<i64>(square_class_rep(n1, q.p));
    SqrtTable roots(q, branch);
    std::map<std::pair<i64, i64>, cplx> cache;
    auto piece = [&](const std::array<int, 4>& e) {
        auto ab = decomposition_params(e, n1, n2, u, q, branch);
        auto it = cache.find(ab);
        if (it == cache.end()) it = cache.emplace(ab, sigma_reduced_table(ab.first, ab.second, a, k, q, u, roots)).first;
        return static_cast<double>(decomposition_sign(e, q)) * it->second;
    };
    const double scale = std::pow(static_cast<double>(q.p), 2.0 * q.s);
    cplx decomposed = 0.0;
    for (const auto& e : all_eps()) decomposed += piece(e);
    double residual = std::abs(full - scale * decomposed);
    if (umod(a, q.p) == 0) {
        spec.variant = SigmaVariant::Sharp;
        cplx sharp = sigma_complete(spec, &branch);
        cplx sharp_dec = 0.0;
        for (const auto& e : sharp_eps()) sharp_dec += piece(e);
        residual = std::max(residual, std::abs(sharp - scale * sharp_dec));
    }
    return report(residual, false);
}

BoundReport reduction_audit(i64 A, i64 B, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch) {
    require_stationary_prime(q, "reduction_audit");
    const int oa = std::min(ord_p(mod(A, static_cast<i64>(q.q)), q.p), q.s);
    const int ob = std::min(ord_p(mod(B, static_cast<i64>(q.q)), q.p), q.s);
    if (oa != ob || oa == 0) throw std::invalid_argument("reduction_audit: needs p^nu || A and B with nu >= 1");
    const int nu = oa;
    SqrtTable roots(q, branch);
    const cplx full = sigma_reduced_table(A, B, a, k, q, u, roots);
    const u64 pnu = ipow(q.p, nu);
    cplx expected;
    std::string clause;
    if (nu >= q.s) {
        // A = B = 0: admissibility only sees m mod p, so the sum is
        // p^{s-1} sum_{r mod p admissible} e(-kr/p^s) when p^{s-1} | k and 0 otherwise
        const u64 low = ipow(q.p, q.s - 1);
        if (umod(k, low) != 0) {
            expected = 0.0;
            clause = "vanishing";
        } else if (umod(k, q.q) == 0) {
            expected = static_cast<double>(admissible_count(a, q, u, roots));
            clause = "count";
        } else {
            const i64 P = static_cast<i64>(q.p), Q = static_cast<i64>(q.q);
            for (i64 r = 1; r < P; ++r) {
                const i64 ra = mod(r + a, P);
                if (ra == 0 || kronecker_symbol(r * u, P) != 1 || kronecker_symbol(ra * u, P) != 1) continue;
                expected += e_frac(-static_cast<i64>(static_cast<i128>(k) * r % Q), Q);
            }
            expected *= static_cast<double>(low);
            clause = "periodic";
        }
    } else if (umod(k, pnu) != 0) {
        expected = 0.0;
        clause = "vanishing";
    } else {
        auto low = q.with_exponent(q.s - nu);
        const i64 P = static_cast<i64>(pnu);
        expected = static_cast<double>(pnu) *
                   sigma_reduced_table(mod(A, static_cast<i64>(q.q)) / P, mod(B, static_cast<i64>(q.q)) / P, a,
                                       mod(k, static_cast<i64>(q.q)) / P, low, u, SqrtTable(low, branch));
        clause = "reduction";
    }
    auto r = BoundReport::make("reduction-" + clause, std::abs(full - expected), 1e-6 * static_cast<double>(q.q));
    r.params = {{"p", double(q.p)}, {"s", double(q.s)}, {"nu", double(nu)}, {"A", double(A)},
                {"B", double(B)},   {"a", double(a)},   {"k", double(k)},   {"abs_sigma", std::abs(full)}};
    return r;
}

BoundReport prime_sigma_report(i64 n1, i64 n2, i64 a, i64 k, u64 p) {
    if (!is_prime(p)) throw std::invalid_argument("prime_sigma_report: p must be prime");
    const cplx v = sigma_complete(CompleteSumSpec{n1, n2, a, k, p});
    const u64 ad = static_cast<u64>(static_cast<u128>(umod(a, p)) * umod(n1 - n2, p) % p);
    const u64 g = gcd(gcd(p, ad), umod(k, p));
    auto r = BoundReport::make("prime-sigma", std::abs(v), std::pow(double(p), 2.5) * std::sqrt(double(g)));
    r.params = {{"p", double(p)}, {"n1", double(n1)}, {"n2", double(n2)},
                {"a", double(a)}, {"k", double(k)},   {"imag", v.imag()}};
    return r;
}

BoundReport aligned_sigma_report(i64 A, i64 a, i64 k, const PrimePowerModulus& q, i64 u, const SqrtBranch& branch) {
    require_stationary_prime(q, "aligned_sigma_report");
    if (umod(a, q.p) != 0) throw std::invalid_argument("aligned_sigma_report: needs p | a");
    SqrtTable roots(q, branch);
    const cplx v = sigma_reduced_table(A, A, a, k, q, u, roots) + sigma_reduced_table(-A, -A, a, k, q, u, roots);
    const u64 Aa = static_cast<u64>(static_cast<u128>(umod(A, q.q)) * umod(a, q.q) % q.q);
    const u64 g = gcd(gcd(q.q, Aa), umod(k, q.q));
    const u64 qp = q.q / q.p;
    const u64 d = gcd(qp, Aa % qp);
    const bool predicted_zero = umod(k, d) != 0;
    const double lhs = std::abs(v);
    auto r = BoundReport::make("aligned-sigma", lhs, std::sqrt(double(q.q)) * std::sqrt(double(g)));
    r.params = {{"p", double(q.p)},
                {"s", double(q.s)},
                {"A", double(A)},
                {"a", double(a)},
                {"k", double(k)},
                {"predicted_zero", predicted_zero ? 1.0 : 0.0},
                {"vanishing_violation", predicted_zero && lhs > 1e-8 * double(q.q) ? 1.0 : 0.0}};
    return r;
}

cplx sigma_tilde(i64 A, i64 a, i64 k, const PrimePowerModulus& q, i64 u) {
    if (umod(a, q.p) != 0) throw std::invalid_argument("sigma_tilde: needs p | a");
    const i64 Q = static_cast<i64>(q.q);
    const i64 ub = static_cast<i64>(mod_inverse(u, q.q));
    const i64 Ar = mod(A, Q), kr = mod(k, Q), au = mod(static_cast<i128>(mod(a, Q)) * mod(u, Q), Q);
    cplx acc = 0.0;
    for (i64 x = 1; x < Q; ++x) {
        if (x % static_cast<i64>(q.p) == 0) continue;
        const i64 xb = static_cast<i64>(mod_inverse(x, q.q));
        const i64 w = mod(1 + static_cast<i128>(au) * xb % Q * xb, Q);
        const i64 root = static_cast<i64>(one_unit_sqrt(w, q));
        i128 f = 2 * static_cast<i128>(Ar) * x % Q * mod(root - 1, Q) -
                 static_cast<i128>(kr) * ub % Q * (static_cast<i128>(x) * x % Q);
        acc += e_frac(mod(f, Q), Q);
    }
    return 0.5 * acc;
}

i64 rational_phase(i64 A, i64 B, i64 a, i64 k, i64 u, i64 v, u64 p) {
    const i64 P = static_cast<i64>(p);
    const i64 vb = static_cast<i64>(mod_inverse(v, p));
    const i64 au = mod(static_cast<i128>(mod(a, P)) * mod(u, P), P);
    const i64 plus = mod(v + static_cast<i128>(au) * vb, P);
    const i64 minus = mod(v - static_cast<i128>(au) * vb, P);
    const i64 c = mod(static_cast<i128>(mod_inverse(4 * mod(u, P), p)) * mod(k, P), P);
    i128 R = static_cast<i128>(mod(A, P)) * plus + static_cast<i128>(mod(B, P)) * minus -
             static_cast<i128>(c) * (static_cast<i128>(minus) * minus % P);
    return mod(R, P);
}

std::optional<BoundReport> rational_phase_report(i64 A, i64 B, i64 a, i64 k, i64 u, u64 p) {
    const i64 P = static_cast<i64>(p);
    const i64 au = mod(static_cast<i128>(mod(a, P)) * mod(u, P), P);
    const i64 c = mod(static_cast<i128>(mod_inverse(4 * mod(u, P), p)) * mod(k, P), P);
    // R = f1 / v^2 with f1 = A v (v^2 + au) + B v (v^2 - au) - c (v^2 - au)^2
    std::vector<i64> f1 = {mod(-static_cast<i128>(c) * au % P * au, P), mod(static_cast<i128>(au) * (A - B), P),
                           mod(2 * static_cast<i128>(c) * au, P), mod(A + B, P), mod(-c, P)};
    int e2 = 2;
    auto is_zero = [&] { return std::all_of(f1.begin(), f1.end(), [](i64 x) { return x == 0; }); };
    if (is_zero()) return std::nullopt;
    while (e2 > 0 && f1[0] == 0) {
        f1.erase(f1.begin());
        --e2;
    }
    int d1 = static_cast<int>(f1.size()) - 1;
    while (d1 > 0 && f1[d1] == 0) --d1;
    if (d1 == 0 && e2 == 0) return std::nullopt;
    cplx acc = 0.0;
    for (i64 v = (e2 > 0 ? 1 : 0); v < P; ++v) {
        if (v == 0) {
            acc += e_frac(f1[0], P);
            continue;
        }
        acc += e_frac(rational_phase(A, B, a, k, u, v, p), P);
    }
    auto r = BoundReport::make("rational-phase", std::abs(acc), (d1 + 2 * e2 - 1) * std::sqrt(double(p)) + 1.0);
    r.params = {{"p", double(p)}, {"A", double(A)},  {"B", double(B)},  {"a", double(a)},
                {"k", double(k)}, {"deg_f1", double(d1)}, {"deg_f2", double(e2)}};
    return r;
}

double prime_sigma_hat_residual(i64 A, i64 B, i64 a, i64 k, i64 u, const SqrtBranch& branch) {
    const u64 p = branch.p();
    const i64 P = static_cast<i64>(p);
    if (umod(a, p) == 0) throw std::invalid_argument("prime_sigma_hat_residual: needs p not dividing a");
    PrimePowerModulus q(p, 1);
    SqrtTable roots(q, branch);
    cplx lhs = 0.0;
    for (int e1 : {1, -1})
        for (int e2 : {1, -1}) lhs += sigma_reduced_table(e1 * A, e2 * B, a, k, q, u, roots);
    const i64 au = mod(static_cast<i128>(mod(a, P)) * mod(u, P), P);
    cplx rhs = 0.0;
    for (i64 v = 1; v < P; ++v) {
        i64 v2 = v * v % P;
        if (v2 == au || v2 == mod(-au, P)) continue;
        rhs += e_frac(rational_phase(A, B, a, k, u, v, p), P);
    }
    return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------

double short_product_sum(const ShortSumSpec& spec, const KloostermanEvaluator& kl) {
    if (!(spec.M > 1.0)) throw std::invalid_argument("short_product_sum: needs M > 1");
    if (spec.r == 0 || spec.q % spec.r != 0) throw std::invalid_argument("short_product_sum: r must divide q");
    if (kl.modulus() != spec.r) throw std::invalid_argument("short_product_sum: evaluator modulus mismatch");
    const i64 last = spec.A + static_cast<i64>(std::floor(spec.M));
    double acc = 0.0, comp = 0.0;
    for (i64 m = spec.A + 1; m <= last; ++m) {
        if (gcd_signed(m, static_cast<i64>(spec.q)) != 1) continue;
        double term = kl(m, spec.n1) * kl(m, spec.n2);
        // Kahan
        double y = term - comp;
        double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    return acc;
}

double short_product_sum(const ShortSumSpec& spec) { return short_product_sum(spec, KloostermanEvaluator(spec.r)); }

double short_sum_sigma(u64 r, u64 s) {
    auto fr = factorize(r);
    const u64 t = r / fr.part_supported_on(s);
    auto ft = factorize(t);
    if (ft.is_cube_free()) return 0.0;
    return std::pow(double(r), 1.25) * std::pow(double(s), 0.25) * std::pow(double(ft.square_part()), 0.25);
}

BoundReport theorem5_bound(const ShortSumSpec& spec, double eps_power, const KloostermanEvaluator& kl) {
    if (spec.s == 0 || spec.r % spec.s != 0) throw std::invalid_argument("theorem5_bound: s must divide r");
    const u64 six_part = factorize(spec.r).part_supported_on(6);
    if (spec.s % six_part != 0) throw std::invalid_argument("theorem5_bound: (r, 6^inf) must divide s");
    const double lhs = std::abs(short_product_sum(spec, kl));
    const double r = double(spec.r), s = double(spec.s), M = spec.M;
    const double g = double(gcd_signed(static_cast<i64>(spec.r), spec.n1 - spec.n2));
    const double sig = short_sum_sigma(spec.r, spec.s);
    const double body = std::sqrt(M) * r * std::sqrt(s) + std::sqrt(M) * std::pow(r, 1.25) / std::pow(s, 0.25) +
                        M * std::pow(r, 0.75) * std::pow(g, 0.25) * std::pow(s, 0.25) + r * s + sig;
    auto rep = BoundReport::make("theorem5", lhs, eps_proxy(r, eps_power) * body);
    rep.params = {{"r", r},  {"s", s},    {"M", M},           {"A", double(spec.A)}, {"n1", double(spec.n1)},
                  {"n2", double(spec.n2)}, {"sigma", sig}, {"eps_power", eps_power}};
    return rep;
}

BoundReport theorem5_bound(const ShortSumSpec& spec, double eps_power) {
    return theorem5_bound(spec, eps_power, KloostermanEvaluator(spec.r));
}

// ---------------------------------------------------------------------------

cplx bhat_sum(const std::vector<PeriodicTable>& b1, i64 h, i64 H, u64 r1, u64 r2, i64 k) {
    const i64 R1 = static_cast<i64>(r1);
    const i64 shift = mod(static_cast<i128>(h) * H * static_cast<i128>(r2), R1);
    cplx acc = 0.0;
    for (const auto& b : b1) {
        if (b.size() != r1) throw std::invalid_argument("bhat_sum: table period mismatch");
        for (i64 m = 0; m < R1; ++m)
            acc += b[(m + shift) % R1] * std::conj(b[m]) * e_frac(-static_cast<i64>(static_cast<i128>(k) * m % R1), R1);
    }
    return acc;
}

std::vector<cplx> bhat_all(const std::vector<PeriodicTable>& b1, i64 h, i64 H, u64 r2) {
    if (b1.empty()) throw std::invalid_argument("bhat_all: no tables");
    const i64 R1 = static_cast<i64>(b1[0].size());
    const i64 shift = mod(static_cast<i128>(h) * H * static_cast<i128>(r2), R1);
    std::vector<cplx> c(R1, 0.0);
    for (const auto& b : b1) {
        if (static_cast<i64>(b.size()) != R1) throw std::invalid_argument("bhat_all: table period mismatch");
        for (i64 m = 0; m < R1; ++m) c[m] += b[(m + shift) % R1] * std::conj(b[m]);
    }
    return dft(c);
}

WeylReports weyl_completion_audit(const std::vector<PeriodicTable>& b1, const std::vector<PeriodicTable>& b2, i64 H,
                                  i64 M, i64 A) {
    if (b1.empty() || b1.size() != b2.size()) throw std::invalid_argument("weyl_completion_audit: need I >= 1 pairs");
    if (H < 1 || M < 1) throw std::invalid_argument("weyl_completion_audit: needs H, M >= 1");
    const i64 r1 = static_cast<i64>(b1[0].size()), r2 = static_cast<i64>(b2[0].size());
    if (r1 == 0 || r2 == 0) throw std::invalid_argument("weyl_completion_audit: empty table");
    for (std::size_t i = 0; i < b1.size(); ++i)
        if (static_cast<i64>(b1[i].size()) != r1 || static_cast<i64>(b2[i].size()) != r2)
            throw std::invalid_argument("weyl_completion_audit: period mismatch");
    const double I = double(b1.size());

    double R1 = 0, R2 = 0;
    for (const auto& b : b1)
        for (auto v : b) R1 = std::max(R1, std::abs(v));
    for (const auto& b : b2)
        for (auto v : b) R2 = std::max(R2, std::abs(v));

    cplx total = 0.0;
    double diag = 0.0;
    for (i64 m = A + 1; m <= A + M; ++m) {
        for (std::size_t i = 0; i < b1.size(); ++i) {
            cplx v1 = b1[i][mod(m, r1)];
            total += v1 * b2[i][mod(m, r2)];
            diag += std::norm(v1);
        }
    }
    const double lhs = std::norm(total);
    const i64 step = H * r2;
    const i64 hmax = M / step;

    // differencing with b1i cut to (A, A+M]
    double off = 0.0;
    for (i64 h = -hmax; h <= hmax; ++h) {
        if (h == 0) continue;
        cplx acc = 0.0;
        for (i64 m = A + 1; m <= A + M; ++m) {
            i64 mh = m + h * step;
            if (mh <= A || mh > A + M) continue;
            for (const auto& b : b1) acc += b[mod(mh, r1)] * std::conj(b[mod(m, r1)]);
        }
        off += std::abs(acc);
    }
    const double Hr2 = double(step);
    const double rhs13 = (Hr2 * R2 * R2 + R2 * R2 * Hr2 * Hr2 / double(M)) * I * diag + Hr2 * R2 * R2 * I * off;

    // completion on c = sum_i b1i and on each differenced sequence
    double worst14 = 0.0, worst14_lhs = 0.0, worst14_rhs = 0.0;
    auto completion_case = [&](const std::vector<cplx>& c) {
        cplx s = 0.0;
        for (i64 m = A + 1; m <= A + M; ++m) s += c[mod(m, r1)];
        double rhs = completion_weight(dft(c), double(M));
        double l = std::abs(s);
        double ratio = rhs > 0 ? l / rhs : (l < 1e-9 ? 0.0 : INFINITY);
        if (ratio >= worst14) {
            worst14 = ratio;
            worst14_lhs = l;
            worst14_rhs = rhs;
        }
    };
    {
        std::vector<cplx> c(r1, 0.0);
        for (const auto& b : b1)
            for (i64 m = 0; m < r1; ++m) c[m] += b[m];
        completion_case(c);
    }

    // combined bound through the bhat sums
    double offB = 0.0;
    for (i64 h = -hmax; h <= hmax; ++h) {
        if (h == 0) continue;
        std::vector<cplx> c(r1, 0.0);
        const i64 shift = mod(static_cast<i128>(h) * step, r1);
        for (const auto& b : b1)
            for (i64 m = 0; m < r1; ++m) c[m] += b[(m + shift) % r1] * std::conj(b[m]);
        completion_case(c);
        offB += completion_weight(dft(c), double(M));
    }
    const double rhs15 = (double(M) + Hr2) * Hr2 * (R1 * R2) * (R1 * R2) * I * I + Hr2 * R2 * R2 * I * offB;

    std::map<std::string, double> params = {{"r1", double(r1)}, {"r2", double(r2)}, {"H", double(H)},
                                            {"M", double(M)},   {"A", double(A)},   {"I", I}};
    WeylReports out;
    out.differencing = BoundReport::make("differencing", lhs, rhs13);
    out.differencing.params = params;
    out.completion = BoundReport::make("completion", worst14_lhs, worst14_rhs);
    out.completion.params = params;
    out.combined = BoundReport::make("differencing-completion", lhs, rhs15);
    out.combined.params = params;
    return out;
}

std::pair<PeriodicTable, PeriodicTable> kloosterman_pair_tables(i64 n1, i64 n2, u64 r1, u64 r2) {
    if (r1 == 0 || r2 == 0 || gcd(r1, r2) != 1) throw std::invalid_argument("kloosterman_pair_tables: need coprime moduli");
    auto build = [&](u64 ra, u64 rb) {
        PeriodicTable t(ra, 0.0);
        KloostermanEvaluator kl(ra);
        const i64 inv = ra == 1 ? 0 : static_cast<i64>(mod_inverse(static_cast<i64>(rb % ra), ra));
        const i64 Ra = static_cast<i64>(ra);
        const i64 x1 = mod(static_cast<i128>(inv) * n1, Ra), x2 = mod(static_cast<i128>(inv) * n2, Ra);
        for (u64 m = 0; m < ra; ++m) {
            if (gcd(m, ra) != 1) continue;
            const i64 mm = mod(static_cast<i128>(inv) * static_cast<i64>(m), Ra);
            t[m] = kl(mm, x1) * kl(mm, x2);
        }
        return t;
    };
    return {build(r1, r2), build(r2, r1)};
}

double bhat_product_residual(i64 n1, i64 n2, u64 r1, u64 r2, i64 h, i64 H, i64 k, int sharp_count) {
    if (gcd(r1, 6 * r2) != 1) throw std::invalid_argument("bhat_product_residual: needs (r1, 6 r2) = 1");
    const auto fac = factorize(r1).factors;
    if (sharp_count < 0 || sharp_count > static_cast<int>(fac.size()))
        throw std::invalid_argument("bhat_product_residual: bad sharp count");
    const i64 R1 = static_cast<i64>(r1);
    const i128 a = static_cast<i128>(h) * H * static_cast<i128>(r2);

    struct Comp {
        PrimePowerModulus q;
        i64 Qb, N1, N2;
    };
    std::vector<Comp> comps;
    for (auto [p, s] : fac) {
        PrimePowerModulus q(p, s);
        const i64 Qj = static_cast<i64>(q.q);
        const i64 Qb = static_cast<i64>(mod_inverse(static_cast<i64>((r1 / q.q) % q.q), q.q));
        const i64 r2b = static_cast<i64>(mod_inverse(static_cast<i64>(r2 % q.q), q.q));
        const i64 t = mod(static_cast<i128>(Qb) * r2b, Qj);
        const i64 t2 = mod(static_cast<i128>(t) * t, Qj);
        comps.push_back({q, Qb, mod(static_cast<i128>(t2) * n1, Qj), mod(static_cast<i128>(t2) * n2, Qj)});
    }
    for (int j = 0; j < sharp_count; ++j)
        if (comps[j].q.s < 2 || mod(a, static_cast<i64>(comps[j].q.p)) != 0)
            throw std::invalid_argument("bhat_product_residual: sharp factors need s >= 2 and p | hHr2");

    // direct side: sum over eps of bhat for the eps-split b1
    const int nsplit = 2 * sharp_count;
    std::vector<std::vector<cplx>> eps_tabs;  // [j][eps index][x], stored flat per (j, which n, eps)
    std::vector<std::vector<double>> plain;   // per j > rho: S(x, N1) S(x, N2)
    std::vector<std::array<std::vector<cplx>, 4>> sharp_tabs(sharp_count);
    for (int j = 0; j < static_cast<int>(comps.size()); ++j) {
        const auto& c = comps[j];
        if (j < sharp_count) {
            SqrtBranch br(c.q.p);
            SqrtTable roots(c.q, br);
            sharp_tabs[j][0] = eps_table(1, c.N1, c.q, roots);
            sharp_tabs[j][1] = eps_table(-1, c.N1, c.q, roots);
            sharp_tabs[j][2] = eps_table(1, c.N2, c.q, roots);
            sharp_tabs[j][3] = eps_table(-1, c.N2, c.q, roots);
        } else {
            KloostermanEvaluator kl(c.q.q);
            std::vector<double> t(c.q.q);
            for (u64 x = 0; x < c.q.q; ++x) t[x] = kl(static_cast<i64>(x), c.N1) * kl(static_cast<i64>(x), c.N2);
            plain.push_back(std::move(t));
        }
    }
    const i64 shift = mod(a, R1);
    cplx direct = 0.0;
    for (int mask = 0; mask < (1 << nsplit); ++mask) {
        std::vector<cplx> b(R1);
        for (i64 m = 0; m < R1; ++m) {
            if (gcd(static_cast<u64>(m), r1) != 1) {
                b[m] = 0.0;
                continue;
            }
            cplx v = 1.0;
            std::size_t pi = 0;
            for (int j = 0; j < static_cast<int>(comps.size()); ++j) {
                const u64 x = static_cast<u64>(m) % comps[j].q.q;
                if (j < sharp_count) {
                    int e1 = (mask >> (2 * j)) & 1, e2 = (mask >> (2 * j + 1)) & 1;
                    v *= sharp_tabs[j][e1][x] * sharp_tabs[j][2 + e2][x];
                } else {
                    v *= plain[pi++][x];
                }
            }
            b[m] = v;
        }
        for (i64 m = 0; m < R1; ++m)
            direct += b[(m + shift) % R1] * std::conj(b[m]) * e_frac(-static_cast<i64>(static_cast<i128>(k) * m % R1), R1);
    }

    // product side
    cplx product = 1.0;
    for (int j = 0; j < static_cast<int>(comps.size()); ++j) {
        const auto& c = comps[j];
        const i64 Qj = static_cast<i64>(c.q.q);
        CompleteSumSpec spec{c.N1, c.N2, mod(a, Qj), mod(static_cast<i128>(c.Qb) * k, Qj), c.q.q};
        if (j < sharp_count) {
            const bool defined = c.N1 % static_cast<i64>(c.q.p) != 0 && c.N2 % static_cast<i64>(c.q.p) != 0 &&
                                 kronecker_symbol(mod(static_cast<i128>(c.N1) * c.N2, static_cast<i64>(c.q.p)),
                                                  static_cast<i64>(c.q.p)) == 1;
            if (!defined) {
                product = 0.0;
                break;
            }
            spec.variant = SigmaVariant::Sharp;
        }
        product *= sigma_complete(spec);
    }
    const double scale = std::max({std::abs(direct), std::abs(product), double(r1) * double(r1)});
    return std::abs(direct - product) / scale;
}

} // namespace kloosterlab
