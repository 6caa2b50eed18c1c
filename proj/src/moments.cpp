#include "kloosterlab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "kloosterlab/arith.hpp"
#include "kloosterlab/parallel.hpp"

namespace kloosterlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kZeta2 = kPi * kPi / 6.0;
// zeta'(2) / zeta(2) = gamma + log 2 pi - 12 log A (Glaisher)
constexpr double kLogGlaisher = 0.24875447703378426;
const double kZetaLogDeriv2 = std::numbers::egamma + std::log(kTwoPi) - 12.0 * kLogGlaisher;

void check_weights(const Newform& f1, const Newform& f2) {
    if ((f1.weight - f2.weight) % 4 != 0)
        throw std::invalid_argument("moments: weights must agree mod 4 (otherwise the central product vanishes)");
}

void check_table(const Newform& f, u64 n, const char* who) {
    if (f.n_max < n)
        throw std::out_of_range(std::string(who) + ": coefficient table of weight " + std::to_string(f.weight) +
                                " stops at " + std::to_string(f.n_max) + ", needs " + std::to_string(n));
}

std::vector<u64> smallest_prime_factors(u64 N) {
    std::vector<u64> spf(N + 1, 0);
    for (u64 i = 2; i <= N; ++i) {
        if (spf[i]) continue;
        for (u64 j = i; j <= N; j += i)
            if (!spf[j]) spf[j] = i;
    }
    return spf;
}

// multiplicative extension of local series b_p[j] (j = exponent)
template <class Local>
std::vector<double> multiplicative(u64 N, Local local) {
    auto spf = smallest_prime_factors(N);
    std::vector<double> a(N + 1, 0.0);
    if (N >= 1) a[1] = 1.0;
    std::vector<double> bp;
    for (u64 n = 2; n <= N; ++n) {
        const u64 p = spf[n];
        u64 m = n;
        int e = 0;
        while (m % p == 0) {
            m /= p;
            ++e;
        }
        if (m > 1) {
            a[n] = a[m] * a[n / m];
        } else {
            bp = local(p, e);
            a[n] = bp[static_cast<std::size_t>(e)];
        }
    }
    return a;
}

// log of prod_j Gamma_R(z + mu_j)
cplx log_gamma_factor(const std::vector<double>& mu, cplx z) {
    cplx acc = 0.0;
    for (double m : mu) acc += -0.5 * (z + m) * std::log(kPi) + lgamma_complex(0.5 * (z + m));
    return acc;
}

// Trapezoid nodes on Re w = c for
// V(y) = (1/2 pi i) int_{(c)} gamma(z+w)/gamma(s) G(w) y^{-w} dw/w,
// so the dual half (z = 1 - s) already carries gamma(1-s)/gamma(s).
struct AfeNodes {
    std::vector<cplx> w, weight;
};

constexpr double kAfeAbscissa = 1.5;

AfeNodes afe_nodes(const std::vector<double>& mu, cplx z, cplx s, double tau, double c = kAfeAbscissa) {
    AfeNodes nd;
    const double h = kAfeAbscissa / 6.0;
    // Gaussian cut of G and at least the exponential decay of the gamma factor
    const double T = std::min(7.0 * tau, 60.0) + 4.0;
    const int J = static_cast<int>(std::ceil(T / h));
    const cplx lg0 = log_gamma_factor(mu, s);
    for (int j = -J; j <= J; ++j) {
        const cplx w(c, j * h);
        const cplx v = std::exp(log_gamma_factor(mu, z + w) - lg0 + (w / tau) * (w / tau)) / w;
        nd.w.push_back(w);
        nd.weight.push_back(v * (h / kTwoPi));
    }
    return nd;
}

// min over c of y^{-c} (1/2 pi) int |integrand| dt: an upper bound for |V(y)|
// free of the cancellation noise of the c = 1.5 evaluation
double afe_v_bound(const std::vector<double>& mu, cplx z, cplx s, double tau, double y) {
    double best = INFINITY;
    for (double c : {1.5, 3.0, 6.0, 12.0, 24.0}) {
        const auto nd = afe_nodes(mu, z, s, tau, c);
        double acc = 0.0;
        for (const cplx& v : nd.weight) acc += std::abs(v);
        best = std::min(best, acc * std::pow(y, -c));
    }
    return best;
}

// sum_{n <= N} a(n) n^{-z} V_z(n)
cplx afe_half(const SelfDualL& L, u64 N, cplx z, const AfeNodes& nd) {
    std::vector<cplx> per_node(nd.w.size(), 0.0);
    for (u64 n = 1; n <= N; ++n) {
        const double an = L.a[n];
        if (an == 0.0) continue;
        const double ln = std::log(static_cast<double>(n));
        for (std::size_t j = 0; j < nd.w.size(); ++j) per_node[j] += an * std::exp(-(z + nd.w[j]) * ln);
    }
    cplx acc = 0.0;
    for (std::size_t j = 0; j < nd.w.size(); ++j) acc += nd.weight[j] * per_node[j];
    return acc;
}

double harmonic(int n) {
    double h = 0.0;
    for (int j = 1; j <= n; ++j) h += 1.0 / j;
    return h;
}

// psi(k/2) for even k
double digamma_half_weight(int k) { return harmonic(k / 2 - 1) - std::numbers::egamma; }

constexpr double kLValueTol = 1e-15;
constexpr double kComplexStep = 1e-6;

LValue l_value_at_one(const SelfDualL& L, double tau) {
    LValue out;
    out.terms = afe_length(L.mu, 1.0, tau, kLValueTol);
    out.value = afe_evaluate(L, 1.0, tau).real();
    out.logderiv = afe_evaluate(L, cplx(1.0, kComplexStep), tau).imag() / kComplexStep / out.value;
    return out;
}

// coefficient range that keeps afe_length covered with some room
u64 lvalue_table_length(const std::vector<double>& mu, double tau) {
    return std::max(afe_length(mu, 1.0, tau, kLValueTol), afe_length(mu, cplx(1.0, kComplexStep), tau, kLValueTol));
}

std::vector<double> sym2_mu(int k) { return {1.0, k - 1.0, static_cast<double>(k)}; }

std::vector<double> rankin_mu(int k1, int k2) {
    const double s = (k1 + k2) / 2.0, d = std::abs(k1 - k2) / 2.0;
    return {s - 1.0, s, d, d + 1.0};
}

} // namespace

// ---------------------------------------------------------------------------

LocalFactors local_factors(const Newform& f1, const Newform& f2, u64 q, cplx s) {
    if (q == 0) throw std::invalid_argument("local_factors: q must be positive");
    LocalFactors out;
    for (auto [p, e] : factorize(q).factors) {
        check_table(f1, p * p, "local_factors");
        check_table(f2, p * p, "local_factors");
        const double l1 = f1.lam(p), l2 = f2.lam(p);
        const double l1sq = f1.lam(p * p), l2sq = f2.lam(p * p);
        const double lp = std::log(static_cast<double>(p));
        // polynomials in X = p^{-s} and their X-derivatives
        auto pP = [&](cplx X) { return 1.0 - l1sq * X + l1sq * X * X - X * X * X; };
        auto dP = [&](cplx X) { return -l1sq + 2.0 * l1sq * X - 3.0 * X * X; };
        auto pQ = [&](cplx X) {
            return 1.0 - l1 * l2 * X + (l1sq + l2sq) * X * X - l1 * l2 * X * X * X + X * X * X * X;
        };
        auto dQ = [&](cplx X) {
            return -l1 * l2 + 2.0 * (l1sq + l2sq) * X - 3.0 * l1 * l2 * X * X + 4.0 * X * X * X;
        };
        auto zeta2 = [&](cplx X) { return 1.0 / (1.0 - X * X); };
        const cplx X = std::exp(-s * lp);
        out.P *= pP(X) * zeta2(X);
        out.Q *= pQ(X) * zeta2(X);
        const double X1 = 1.0 / static_cast<double>(p);
        out.P1 *= pP(X1).real() * zeta2(X1).real();
        out.Q1 *= pQ(X1).real() * zeta2(X1).real();
        // d/ds log F(p^{-s}) = -log p X F'(X)/F(X); for (1 - X^2)^{-1}: -2 log p X^2/(1 - X^2)
        const double zeta_part = -2.0 * lp * X1 * X1 / (1.0 - X1 * X1);
        out.logderiv_P += -lp * X1 * dP(X1).real() / pP(X1).real() + zeta_part;
        out.logderiv_Q += -lp * X1 * dQ(X1).real() / pQ(X1).real() + zeta_part;
    }
    return out;
}

SelfDualL sym2_lfunction(const Newform& f, u64 N) {
    check_table(f, N, "sym2_lfunction");
    SelfDualL L;
    L.mu = sym2_mu(f.weight);
    L.a = multiplicative(N, [&](u64 p, int e) {
        const double c = f.lam(p) * f.lam(p) - 1.0;  // lambda(p^2)
        std::vector<double> b(static_cast<std::size_t>(e) + 1, 0.0);
        for (int j = 0; j <= e; ++j) {
            auto B = [&](int i) { return i < 0 ? 0.0 : b[static_cast<std::size_t>(i)]; };
            b[static_cast<std::size_t>(j)] = j == 0 ? 1.0 : c * B(j - 1) - c * B(j - 2) + B(j - 3);
        }
        return b;
    });
    return L;
}

SelfDualL rankin_lfunction(const Newform& f1, const Newform& f2, u64 N) {
    check_table(f1, N, "rankin_lfunction");
    check_table(f2, N, "rankin_lfunction");
    SelfDualL L;
    L.mu = rankin_mu(f1.weight, f2.weight);
    L.a = multiplicative(N, [&](u64 p, int e) {
        const double l1 = f1.lam(p), l2 = f2.lam(p);
        const double e1 = l1 * l2, e2 = l1 * l1 + l2 * l2 - 2.0, e3 = l1 * l2;
        std::vector<double> b(static_cast<std::size_t>(e) + 1, 0.0);
        for (int j = 0; j <= e; ++j) {
            auto B = [&](int i) { return i < 0 ? 0.0 : b[static_cast<std::size_t>(i)]; };
            b[static_cast<std::size_t>(j)] = j == 0 ? 1.0 : e1 * B(j - 1) - e2 * B(j - 2) + e3 * B(j - 3) - B(j - 4);
        }
        return b;
    });
    return L;
}

u64 afe_length(const std::vector<double>& mu, cplx s, double tau, double tol) {
    const cplx zs[2] = {s, 1.0 - s};
    u64 N = 16;
    for (const cplx z : zs) {
        for (;; N *= 2) {
            const double dn = static_cast<double>(N), ln = std::log(dn);
            if (afe_v_bound(mu, z, s, tau, dn) * std::pow(dn, 1.0 - z.real()) * ln * ln * ln < tol) break;
            if (N > (u64{1} << 26)) throw std::runtime_error("afe_length: V does not decay");
        }
    }
    return N;
}

cplx afe_evaluate(const SelfDualL& L, cplx s, double tau) {
    if (!(tau > 0)) throw std::invalid_argument("afe_evaluate: kernel scale must be positive");
    const u64 N = afe_length(L.mu, s, tau, kLValueTol);
    if (L.a.size() <= N)
        throw std::out_of_range("afe_evaluate: needs " + std::to_string(N) + " coefficients, have " +
                                std::to_string(L.a.size() - 1));
    const cplx z2 = 1.0 - s;
    return afe_half(L, N, s, afe_nodes(L.mu, s, s, tau)) + afe_half(L, N, z2, afe_nodes(L.mu, z2, s, tau));
}

LValue sym2_l_value(const Newform& f, double tau) {
    const u64 N = lvalue_table_length(sym2_mu(f.weight), tau);
    return l_value_at_one(sym2_lfunction(f, N), tau);
}

LValue rankin_l_value(const Newform& f1, const Newform& f2, double tau) {
    if (f1.weight == f2.weight)
        throw std::invalid_argument("rankin_l_value: f1 = f2 has a pole at s = 1; use sym2_l_value");
    const u64 N = lvalue_table_length(rankin_mu(f1.weight, f2.weight), tau);
    return l_value_at_one(rankin_lfunction(f1, f2, N), tau);
}

// ---------------------------------------------------------------------------

double constant_c(const Newform& f, const LValue& sym2) {
    return std::numbers::egamma - 0.5 * std::log(kTwoPi) + digamma_half_weight(f.weight) + sym2.logderiv -
           2.0 * kZetaLogDeriv2;
}

double constant_c(const Newform& f) { return constant_c(f, sym2_l_value(f)); }

double constant_c_derived(const Newform& f, const LValue& sym2) { return constant_c(f, sym2) - 0.5 * std::log(kTwoPi); }

MomentConstants moment_constants(const Newform& f1, const Newform& f2) {
    check_weights(f1, f2);
    MomentConstants mc;
    mc.same_form = f1.weight == f2.weight;
    mc.sym2 = sym2_l_value(f1);
    if (!mc.same_form) mc.rankin = rankin_l_value(f1, f2);
    mc.c = constant_c(f1, mc.sym2);
    mc.c_derived = constant_c_derived(f1, mc.sym2);
    return mc;
}

MainTermParams main_term_params(const Newform& f1, const Newform& f2, u64 q, const MomentConstants& mc) {
    if (mc.same_form != (f1.weight == f2.weight)) throw std::invalid_argument("main_term_params: constants for another pair");
    const auto lf = local_factors(f1, f2, q);
    MainTermParams mt;
    mt.P1 = lf.P1;
    mt.logderiv_P = lf.logderiv_P;
    mt.Q1 = lf.Q1;
    mt.L_sym2 = mc.sym2.value;
    mt.L_rankin = mc.rankin ? mc.rankin->value : 0.0;
    mt.c = mc.c;
    mt.c_derived = mc.c_derived;
    mt.same_form = mc.same_form;
    for (auto [p, e] : factorize(q).factors) {
        const double dp = static_cast<double>(p);
        mt.radical_factor *= 1.0 - 1.0 / dp;
        mt.radical_logderiv += std::log(dp) / (dp - 1.0);
    }
    return mt;
}

double main_term_M(const MainTermParams& mt, u64 q, MainTermForm form) {
    if (!mt.same_form) return mt.Q1 * mt.L_rankin;
    const double lq = std::log(static_cast<double>(q));
    if (form == MainTermForm::printed) return mt.P1 * mt.L_sym2 * (lq + mt.c + mt.logderiv_P);
    return mt.radical_factor * mt.P1 * mt.L_sym2 * (lq + mt.c_derived + mt.logderiv_P + mt.radical_logderiv);
}

double main_term(const MainTermParams& mt, u64 q, MainTermForm form) {
    return 2.0 / kZeta2 * static_cast<double>(psi_count(q)) * main_term_M(mt, q, form);
}

// ---------------------------------------------------------------------------

double central_product(const Newform& f1, const Newform& f2, const DirichletCharacter& chi, const WeightTable& W) {
    check_weights(f1, f2);
    if (!chi.is_primitive()) throw std::invalid_argument("central_product: character must be primitive");
    const u64 q = chi.modulus();
    const double q2 = static_cast<double>(q) * static_cast<double>(q);
    const auto X = static_cast<u64>(std::floor(W.x_cut() * q2));
    check_table(f1, X, "central_product");
    check_table(f2, X, "central_product");
    cplx acc = 0.0;
    for (u64 n = 1; n <= X; ++n) {
        const cplx cn = std::conj(chi(static_cast<i64>(n)));
        if (cn == 0.0) continue;
        const double l1n = f1.lam(n), l2n = f2.lam(n), sn = std::sqrt(static_cast<double>(n));
        cplx row = 0.0;
        for (u64 m = 1; m <= X / n; ++m) {
            const cplx cm = chi(static_cast<i64>(m));
            if (cm == 0.0) continue;
            const double w = W(static_cast<double>(n) * static_cast<double>(m) / q2);
            if (w == 0.0) continue;
            row += (f1.lam(m) * l2n + f2.lam(m) * l1n) / std::sqrt(static_cast<double>(m)) * w * cm;
        }
        acc += row * cn / sn;
    }
    if (std::abs(acc.imag()) > 1e-6 * (1.0 + std::abs(acc)))
        throw std::logic_error("central_product: imaginary part " + std::to_string(acc.imag()));
    return acc.real();
}

cplx twisted_central_value(const Newform& f, const DirichletCharacter& chi) {
    if (!chi.is_primitive()) throw std::invalid_argument("twisted_central_value: character must be primitive");
    const u64 q = chi.modulus();
    const double a = f.weight / 2.0;
    // Q(a, 2 pi y) < 1e-17 once 2 pi y passes this
    double ycut = a + 10.0;
    while (boost::math::gamma_q(a, ycut) > 1e-17) ycut *= 1.25;
    const auto N = static_cast<u64>(std::ceil(ycut / kTwoPi * static_cast<double>(q)));
    check_table(f, N, "twisted_central_value");
    cplx tau = 0.0;
    for (u64 t = 1; t <= q; ++t) tau += chi(static_cast<i64>(t)) * e_frac(static_cast<i64>(t), static_cast<i64>(q));
    cplx ik = 1.0;
    for (int j = 0; j < f.weight % 4; ++j) ik *= cplx(0.0, 1.0);
    const cplx eps = ik * tau * tau / static_cast<double>(q);
    cplx s1 = 0.0, s2 = 0.0;
    for (u64 n = 1; n <= N; ++n) {
        const cplx c = chi(static_cast<i64>(n));
        if (c == 0.0) continue;
        const double v = f.lam(n) / std::sqrt(static_cast<double>(n)) *
                         boost::math::gamma_q(a, kTwoPi * static_cast<double>(n) / static_cast<double>(q));
        s1 += v * c;
        s2 += v * std::conj(c);
    }
    return s1 + eps * s2;
}

// ---------------------------------------------------------------------------

DiagonalResult diagonal_term(const Newform& f1, const Newform& f2, u64 q, const WeightTable& W,
                             const MomentConstants& mc) {
    check_weights(f1, f2);
    if (W.weight().k1 != f1.weight || W.weight().k2 != f2.weight)
        throw std::invalid_argument("diagonal_term: weight table built for other weights");
    DiagonalResult out;
    out.q = q;
    out.psi = psi_count(q);
    if (out.psi == 0) throw std::invalid_argument("diagonal_term: q = 2 mod 4 has no primitive characters");
    const double dq = static_cast<double>(q);
    const auto nmax = static_cast<u64>(std::floor(std::sqrt(W.x_cut()) * dq));
    check_table(f1, nmax, "diagonal_term");
    check_table(f2, nmax, "diagonal_term");
    std::vector<double> terms;
    for (u64 n = 1; n <= nmax; ++n) {
        if (gcd(n, q) != 1) continue;
        const double dn = static_cast<double>(n);
        terms.push_back(f1.lam(n) * f2.lam(n) / dn * W(dn * dn / (dq * dq)));
    }
    out.terms = terms.size();
    out.delta = 2.0 * static_cast<double>(out.psi) * pairwise_sum(terms);
    const auto mt = main_term_params(f1, f2, q, mc);
    out.closed_form = main_term(mt, q, MainTermForm::derived);
    out.closed_form_printed = main_term(mt, q, MainTermForm::printed);
    out.deviation = std::abs(out.delta / out.closed_form - 1.0);
    out.deviation_printed = std::abs(out.delta / out.closed_form_printed - 1.0);
    return out;
}

// ---------------------------------------------------------------------------

u64 moment_table_length(u64 q, const WeightTable& W) {
    return static_cast<u64>(std::floor(W.x_cut() * static_cast<double>(q) * static_cast<double>(q)));
}

MomentResult moment_experiment(const Newform& f1, const Newform& f2, u64 q, const WeightTable& W,
                               const MainTermParams& mt, const MomentOptions& opt) {
    check_weights(f1, f2);
    if (q == 0 || q > 700) throw std::invalid_argument("moment_experiment: q must lie in [1, 700]");
    if (q % 4 == 2) throw std::invalid_argument("moment_experiment: q = 2 mod 4 has no primitive characters");
    if (W.weight().k1 != f1.weight || W.weight().k2 != f2.weight)
        throw std::invalid_argument("moment_experiment: weight table built for other weights");
    const double dq = static_cast<double>(q), q2 = dq * dq;
    const u64 X = moment_table_length(q, W);
    check_table(f1, X, "moment_experiment");
    check_table(f2, X, "moment_experiment");

    std::vector<i64> inv(q, 0);
    for (u64 t = 0; t < q; ++t)
        if (gcd(t, q) == 1) inv[t] = static_cast<i64>(mod_inverse(static_cast<i64>(t), q));
    if (q == 1) inv[0] = 0;

    // one task per n <= sqrt(X), pairs n <= m <= X/n
    u64 nmax = 1;
    while ((nmax + 1) * (nmax + 1) <= X) ++nmax;
    struct Part {
        std::vector<double> H;
        u64 pairs = 0;
    };
    auto parts = parallel_map<Part>(static_cast<std::size_t>(nmax), [&](std::size_t idx) {
        const u64 n = idx + 1;
        Part part;
        part.H.assign(q, 0.0);
        if (gcd(n, q) != 1) return part;
        const double l1n = f1.lam(n), l2n = f2.lam(n), dn = static_cast<double>(n);
        const u64 ninv = static_cast<u64>(inv[n % q]);
        for (u64 m = n; m <= X / n; ++m) {
            if (q > 1 && gcd(m, q) != 1) continue;
            const double dm = static_cast<double>(m);
            const double w = W(dn * dm / q2);
            if (w == 0.0) continue;
            const double c = (f1.lam(m) * l2n + f2.lam(m) * l1n) / std::sqrt(dn * dm) * w;
            const u64 t = (m % q) * ninv % q;
            part.H[t] += c;
            if (m != n) part.H[static_cast<std::size_t>(inv[t])] += c;
            ++part.pairs;
        }
        return part;
    });
    MomentResult out;
    out.q = q;
    out.psi = psi_count(q);
    std::vector<double> H(q, 0.0);
    for (const auto& p : parts) {
        for (u64 t = 0; t < q; ++t) H[t] += p.H[t];
        out.pairs += p.pairs;
    }

    auto group = CharacterGroup::create(q);
    const auto chars = group->primitive_characters();
    std::vector<u64> units;
    for (u64 t = 0; t < q; ++t)
        if (q == 1 || gcd(t, q) == 1) units.push_back(t);
    std::vector<double> values(chars.size());
    std::vector<cplx> terms(units.size());
    for (std::size_t i = 0; i < chars.size(); ++i) {
        for (std::size_t j = 0; j < units.size(); ++j)
            terms[j] = chars[i](static_cast<i64>(units[j])) * H[units[j]];
        const cplx v = pairwise_sum(terms);
        values[i] = v.real();
        out.imag_residue = std::max(out.imag_residue, std::abs(v.imag()) / (1.0 + std::abs(v)));
    }
    out.empirical = pairwise_sum(values);

    std::vector<double> orth(units.size());
    for (std::size_t j = 0; j < units.size(); ++j)
        orth[j] = H[units[j]] * static_cast<double>(orthogonality_closed_form(q, static_cast<i64>(units[j])));
    out.orthogonality_residual = std::abs(pairwise_sum(orth) - out.empirical) / (1.0 + std::abs(out.empirical));

    if (opt.naive_check) {
        if (q > 60) throw std::invalid_argument("moment_experiment: the naive check is limited to q <= 60");
        out.naive_residual = 0.0;
        for (std::size_t i = 0; i < chars.size(); ++i) {
            const double v = central_product(f1, f2, chars[i], W);
            out.naive_residual = std::max(out.naive_residual, std::abs(v - values[i]) / (1.0 + std::abs(v)));
        }
    }
    out.main_term = main_term(mt, q);
    out.ratio = out.empirical / out.main_term;
    if (opt.keep_per_character) out.per_character = std::move(values);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kTheta = 7.0 / 64.0;

// sum over m with l2 m / M in [1, 2]
double shifted_core(const Newform& f1, const Newform& f2, u64 l1, u64 l2, i64 h, double N, double M,
                    const RealFunction& V1, const RealFunction& V2, u64& terms) {
    const auto mlo = static_cast<u64>(std::ceil(M / static_cast<double>(l2)));
    const auto mhi = static_cast<u64>(std::floor(2.0 * M / static_cast<double>(l2)));
    std::vector<double> acc;
    for (u64 m = std::max<u64>(mlo, 1); m <= mhi; ++m) {
        const i64 num = h + static_cast<i64>(l2 * m);
        if (num <= 0 || num % static_cast<i64>(l1) != 0) continue;
        const u64 n = static_cast<u64>(num) / l1;
        const double v2 = V2(static_cast<double>(l1 * n) / N);
        if (v2 == 0.0) continue;
        const double v1 = V1(static_cast<double>(l2 * m) / M);
        if (v1 == 0.0) continue;
        check_table(f1, m, "shifted_convolution");
        check_table(f2, n, "shifted_convolution");
        acc.push_back(f1.lam(m) * f2.lam(n) * v1 * v2);
        ++terms;
    }
    return pairwise_sum(acc);
}

void check_shift_args(u64 l1, u64 l2, double N, double M) {
    if (l1 == 0 || l2 == 0) throw std::invalid_argument("shifted_convolution: l1, l2 must be positive");
    if (!(N >= 1) || !(M >= 1)) throw std::invalid_argument("shifted_convolution: N, M must be at least 1");
}

} // namespace

ShiftedSum shifted_convolution(const Newform& f1, const Newform& f2, u64 l1, u64 l2, i64 h, double N, double M,
                               const RealFunction& V1, const RealFunction& V2, double eps_power) {
    check_shift_args(l1, l2, N, M);
    ShiftedSum out;
    out.value = shifted_core(f1, f2, l1, l2, h, N, M, V1, V2, out.terms);
    const double rhs = std::pow(N + M, 0.5 + kTheta) * eps_proxy(N * M, eps_power);
    out.report = BoundReport::make("shifted-individual", std::abs(out.value), rhs);
    out.report.params = {{"l1", double(l1)}, {"l2", double(l2)}, {"h", double(h)}, {"N", N}, {"M", M}};
    return out;
}

ShiftedSum averaged_shifted_convolution(const Newform& f1, const Newform& f2, u64 l1, u64 l2, u64 d, double N,
                                        double M, const RealFunction& V1, const RealFunction& V2,
                                        double eps_power) {
    check_shift_args(l1, l2, N, M);
    if (d == 0) throw std::invalid_argument("averaged_shifted_convolution: d must be positive");
    if (N < 20.0 * M) throw std::invalid_argument("averaged_shifted_convolution: needs N >= 20 M");
    ShiftedSum out;
    // l1 n <= 2N and l2 m >= M bound h = r d by 2N
    const auto rmax = static_cast<u64>(std::floor(2.0 * N / static_cast<double>(d)));
    std::vector<double> parts;
    for (u64 r = 1; r <= rmax; ++r)
        parts.push_back(shifted_core(f1, f2, l1, l2, static_cast<i64>(r * d), N, M, V1, V2, out.terms));
    out.value = pairwise_sum(parts);
    const double dd = static_cast<double>(d);
    const double rhs = eps_proxy(dd * N, eps_power) *
                       (N / std::sqrt(dd) + std::pow(N, 1.25) * std::pow(M, 0.25) / dd +
                        std::pow(N, 0.75) * std::pow(M, 0.25) / std::pow(dd, 0.25) +
                        N * std::sqrt(M) / std::pow(dd, 0.75));
    out.report = BoundReport::make("shifted-average", std::abs(out.value), rhs);
    out.report.params = {{"l1", double(l1)}, {"l2", double(l2)}, {"d", dd}, {"N", N}, {"M", M}};
    return out;
}

} // namespace kloosterlab
