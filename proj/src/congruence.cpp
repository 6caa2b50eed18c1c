#include "kloosterlab/congruence.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

namespace kloosterlab {

namespace {

constexpr u64 kMaxCensusModulus = 10'000'000;

i64 mulq(i64 x, i64 y, i64 Q) { return mod(static_cast<i128>(x) * y, Q); }

i64 powq(i64 x, int e, i64 Q) {
    i64 r = 1 % Q;
    for (int i = 0; i < e; ++i) r = mulq(r, x, Q);
    return r;
}

void check_phase_params(const PhaseParams& params, const char* who) {
    if (params.q.p <= 3) throw std::invalid_argument(std::string(who) + ": requires p > 3");
    if (mod(params.u, static_cast<i64>(params.q.p)) == 0) throw std::invalid_argument(std::string(who) + ": u must be a unit");
}

// ord_p(x) for x mod p^s, capped at s
int ord_capped(i64 x, const PrimePowerModulus& q) {
    x = mod(x, static_cast<i64>(q.q));
    if (x == 0) return q.s;
    return ord_p(x, q.p);
}

} // namespace

PhaseEvaluator::PhaseEvaluator(const PhaseParams& params, const SqrtBranch& branch, int level)
    : params_(params), q_(params.q.with_exponent(level)), roots_(q_, branch) {
    const i64 Q = static_cast<i64>(q_.q);
    inv2_ = static_cast<i64>(mod_inverse(2, q_.q));
    inv4_ = mulq(inv2_, inv2_, Q);
}

bool PhaseEvaluator::admissible(i64 m) const {
    const i64 Q = static_cast<i64>(q_.q);
    return roots_.is_unit_square(mulq(m + params_.a, params_.u, Q)) && roots_.is_unit_square(mulq(m, params_.u, Q));
}

i64 PhaseEvaluator::operator()(i64 m, Phase which) const {
    const i64 Q = static_cast<i64>(q_.q);
    const i64 x = roots_.root(mulq(mod(m + params_.a, Q), params_.u, Q));
    const i64 y = roots_.root(mulq(m, params_.u, Q));
    if (x < 0 || y < 0) throw std::domain_error("phase_eval: m or m+a outside u * squares");
    const i64 xi = static_cast<i64>(mod_inverse(x, q_.q)), yi = static_cast<i64>(mod_inverse(y, q_.q));
    const i64 A = mod(params_.A, Q), B = mod(params_.B, Q), u = mod(params_.u, Q);
    switch (which) {
    case Phase::g:
        return mod(static_cast<i128>(mulq(A, u, Q)) * xi - static_cast<i128>(mulq(B, u, Q)) * yi, Q);
    case Phase::g1: {
        const i64 c = mulq(inv2_, powq(u, 2, Q), Q);
        return mod(-static_cast<i128>(mulq(c, A, Q)) * powq(xi, 3, Q) + static_cast<i128>(mulq(c, B, Q)) * powq(yi, 3, Q), Q);
    }
    case Phase::g2: {
        const i64 c = mulq(mulq(3, inv4_, Q), powq(u, 3, Q), Q);
        return mod(static_cast<i128>(mulq(c, A, Q)) * powq(xi, 5, Q) - static_cast<i128>(mulq(c, B, Q)) * powq(yi, 5, Q), Q);
    }
    }
    throw std::logic_error("phase_eval: unknown phase");
}

i64 phase_eval(const PhaseParams& params, i64 m, Phase which, const SqrtBranch& branch) {
    check_phase_params(params, "phase_eval");
    return PhaseEvaluator(params, branch, params.q.s)(m, which);
}

SolutionCensus count_solutions(const PhaseParams& params, int kappa, i64 target, SolutionClass classification,
                               const SqrtBranch& branch) {
    check_phase_params(params, "count_solutions");
    if (kappa < 1 || kappa > params.q.s) throw std::invalid_argument("count_solutions: needs 1 <= kappa <= s");
    PhaseEvaluator ev(params, branch, kappa);
    const i64 Q = static_cast<i64>(ev.modulus().q), P = static_cast<i64>(params.q.p);
    if (ev.modulus().q > kMaxCensusModulus) throw std::invalid_argument("count_solutions: p^kappa above 10^7");
    const i64 t = mod(target, Q);
    SolutionCensus out{kappa, 0, classification};
    for (i64 m = 0; m < Q; ++m) {
        if (!ev.admissible(m) || ev(m, Phase::g) != t) continue;
        if (classification != SolutionClass::all) {
            const bool singular = ev(m, Phase::g1) % P == 0;
            if (singular != (classification == SolutionClass::singular)) continue;
        }
        ++out.count;
    }
    return out;
}

// ---------------------------------------------------------------------------

bool HenselAudit::constant() const {
    return std::all_of(censuses.begin(), censuses.end(),
                       [&](const SolutionCensus& c) { return c.count == censuses.front().count; });
}

HenselAudit hensel_audit(const HenselProblem& pb, int kappa_base) {
    const PrimePowerModulus& q = pb.q;
    if (kappa_base < 1 || kappa_base > q.s) throw std::invalid_argument("hensel_audit: needs 1 <= kappa_base <= s");
    if (q.q > kMaxCensusModulus) throw std::invalid_argument("hensel_audit: p^s above 10^7");
    const i64 Q = static_cast<i64>(q.q), P = static_cast<i64>(q.p);
    HenselAudit out;
    out.hypotheses_met = true;

    const i64 base = static_cast<i64>(ipow(q.p, kappa_base));
    const i64 tb = mod(pb.target, base);
    std::vector<i64> sols;  // representatives mod p^s of the level-kappa_base solution set
    for (i64 m = 0; m < Q; ++m)
        if (pb.domain(m) && mod(pb.f(m), base) == tb) sols.push_back(m);

    for (i64 m : sols) {
        if (mod(pb.f1(m), P) == 0) {
            out.hypotheses_met = false;
            out.note = "lemma hypotheses not met: f1 not a unit at m = " + std::to_string(m);
            break;
        }
        i64 pmu = base;
        for (int mu = kappa_base; mu < q.s && out.hypotheses_met; ++mu, pmu *= P) {
            const i64 next = pmu * P;
            for (i64 t = 0; t < P; ++t) {
                const i64 mt = mod(m + static_cast<i128>(pmu) * t, Q);
                if (!pb.domain(mt)) {
                    out.hypotheses_met = false;
                    out.note = "lemma hypotheses not met: domain not closed at m = " + std::to_string(m);
                    break;
                }
                const i128 diff = static_cast<i128>(pb.f(mt)) - pb.f(m) - static_cast<i128>(pmu) * t % Q * pb.f1(m);
                if (mod(diff, next) != 0) {
                    out.hypotheses_met = false;
                    out.note = "lemma hypotheses not met: expansion fails at m = " + std::to_string(m) +
                               ", mu = " + std::to_string(mu);
                    break;
                }
            }
        }
        if (!out.hypotheses_met) break;
    }

    i64 pmu = base;
    for (int mu = kappa_base; mu <= q.s; ++mu, pmu *= P) {
        const i64 t = mod(pb.target, pmu);
        SolutionCensus c{mu, 0, SolutionClass::all};
        for (i64 m = 0; m < pmu; ++m)
            if (pb.domain(m) && mod(pb.f(m), pmu) == t) ++c.count;
        out.censuses.push_back(c);
    }
    return out;
}

HenselProblem g_phase_problem(const PhaseParams& params, const SqrtBranch& branch, bool nonsingular_only) {
    check_phase_params(params, "g_phase_problem");
    auto ev = std::make_shared<PhaseEvaluator>(params, branch, params.q.s);
    const i64 P = static_cast<i64>(params.q.p);
    HenselProblem pb;
    pb.q = params.q;
    pb.target = params.k;
    pb.domain = [ev, P, nonsingular_only](i64 m) {
        if (!ev->admissible(m)) return false;
        return !nonsingular_only || (*ev)(m, Phase::g1) % P != 0;
    };
    pb.f = [ev](i64 m) { return (*ev)(m, Phase::g); };
    pb.f1 = [ev](i64 m) { return (*ev)(m, Phase::g1); };
    return pb;
}

HenselProblem aligned_x_problem(i64 A0, i64 a0, int alpha, i64 k0, i64 u, const PrimePowerModulus& q) {
    if (alpha < 1) throw std::invalid_argument("aligned_x_problem: needs alpha >= 1");
    if (q.p <= 3) throw std::invalid_argument("aligned_x_problem: requires p > 3");
    const PrimePowerModulus wide = q.with_exponent(q.s + alpha);
    const i64 Q = static_cast<i64>(q.q), W = static_cast<i64>(wide.q), P = static_cast<i64>(q.p);
    const i64 pa = static_cast<i64>(ipow(q.p, alpha));
    const i64 ub = static_cast<i64>(mod_inverse(u, q.q));
    HenselProblem pb;
    pb.q = q;
    pb.target = 0;
    pb.domain = [P](i64 x) { return mod(x, P) != 0; };
    pb.f = [=](i64 x) {
        const i64 xb = static_cast<i64>(mod_inverse(x, wide.q));
        const i64 w = mod(1 + static_cast<i128>(pa) * mod(static_cast<i128>(a0) * u, W) % W * mulq(xb, xb, W), W);
        const i64 r = static_cast<i64>(mod_inverse(static_cast<i64>(one_unit_sqrt(w, wide)), wide.q));
        const i64 lifted = mod(r - 1, W) / pa;  // r = 1 mod p^alpha
        return mod(static_cast<i128>(A0) * lifted - static_cast<i128>(mulq(k0, ub, Q)) * x, Q);
    };
    pb.f1 = [=](i64 x) {
        const i64 xb = static_cast<i64>(mod_inverse(x, q.q));
        return mod(static_cast<i128>(mulq(mulq(A0, a0, Q), u, Q)) * powq(xb, 3, Q) - mulq(k0, ub, Q), Q);
    };
    return pb;
}

HenselProblem polynomial_problem(const std::vector<i64>& coeffs, i64 target, const PrimePowerModulus& q) {
    const i64 Q = static_cast<i64>(q.q);
    HenselProblem pb;
    pb.q = q;
    pb.target = target;
    pb.domain = [](i64) { return true; };
    pb.f = [coeffs, Q](i64 m) {
        i64 acc = 0;
        for (std::size_t i = coeffs.size(); i-- > 0;) acc = mod(static_cast<i128>(acc) * m + coeffs[i], Q);
        return acc;
    };
    pb.f1 = [coeffs, Q](i64 m) {
        i64 acc = 0;
        for (std::size_t i = coeffs.size(); i-- > 1;)
            acc = mod(static_cast<i128>(acc) * m + static_cast<i128>(coeffs[i]) * static_cast<i64>(i), Q);
        return acc;
    };
    return pb;
}

// ---------------------------------------------------------------------------

namespace {

struct SingularRoots {
    std::vector<i64> roots, values;
    int roots_mod_p = 0;
    bool ki_units = true, g2_units = true;
};

SingularRoots singular_roots(const PhaseParams& params, const SqrtBranch& branch) {
    const PrimePowerModulus& q = params.q;
    if (q.q > kMaxCensusModulus) throw std::invalid_argument("singular_census: p^s above 10^7");
    const i64 P = static_cast<i64>(q.p), Q = static_cast<i64>(q.q);
    SingularRoots out;
    PhaseEvaluator low(params, branch, 1), full(params, branch, q.s);
    for (i64 m = 0; m < P; ++m)
        if (low.admissible(m) && low(m, Phase::g1) == 0) ++out.roots_mod_p;
    for (i64 m = 0; m < Q; ++m) {
        if (!full.admissible(m) || full(m, Phase::g1) != 0) continue;
        out.roots.push_back(m);
        const i64 k = full(m, Phase::g);
        out.values.push_back(k);
        if (k % P == 0) out.ki_units = false;
        if (full(m, Phase::g2) % P == 0) out.g2_units = false;
    }
    return out;
}

} // namespace

SingularCensus singular_census(const PhaseParams& params, const SqrtBranch& branch, i64 v1, i64 v2) {
    check_phase_params(params, "singular_census");
    const i64 P = static_cast<i64>(params.q.p), Q = static_cast<i64>(params.q.q);
    if (mod(params.a, P) == 0) throw std::invalid_argument("singular_census: needs p not dividing a");
    if (mod(params.A, P) == 0 && mod(params.B, P) == 0)
        throw std::invalid_argument("singular_census: p divides both A and B");
    if (kronecker_symbol(mod(v1, P), P) * kronecker_symbol(mod(v2, P), P) != -1)
        throw std::invalid_argument("singular_census: v1, v2 must represent both square classes");

    SingularCensus out;
    auto own = singular_roots(params, branch);
    out.roots = own.roots;
    out.special_values = own.values;
    out.roots_mod_p = own.roots_mod_p;
    out.ki_units = own.ki_units;
    out.g2_units = own.g2_units;

    std::set<i64> T;
    for (i64 v : {v1, v2})
        for (int eps : {1, -1}) {
            PhaseParams pv = params;
            pv.B = eps * params.B;
            pv.a = v;
            for (i64 k : singular_roots(pv, branch).values) T.insert(mulq(mulq(k, k, Q), v, Q));
        }
    out.setT.assign(T.begin(), T.end());
    return out;
}

SingularCensus singular_census(const PhaseParams& params, const SqrtBranch& branch) {
    const u64 p = params.q.p;
    u64 nr = 2;
    while (kronecker_symbol(static_cast<i64>(nr), static_cast<i64>(p)) != -1) ++nr;
    return singular_census(params, branch, 1, static_cast<i64>(nr));
}

int rho(i64 k, const std::vector<i64>& special_values, const PrimePowerModulus& q) {
    int best = -1;
    for (i64 ki : special_values) best = std::max(best, ord_capped(k - ki, q));
    return best;
}

namespace {

u64 singular_count(const PhaseParams& params, int kappa, const SqrtBranch& branch) {
    return count_solutions(params, kappa, params.k, SolutionClass::singular, branch).count;
}

double s_i_sum(i64 k, int kappa, const SingularCensus& census, const PrimePowerModulus& q) {
    const int kstar = kappa / 2;
    const i64 p2 = static_cast<i64>(ipow(q.p, std::min(kappa, 2)));
    double acc = 0.0;
    for (i64 ki : census.special_values) {
        if (mod(k - ki, p2) != 0) continue;
        const int o = ord_capped(k - ki, q);
        if (o >= kappa)
            acc += std::pow(double(q.p), kstar);
        else if (o % 2 == 0 && o / 2 >= 1 && o / 2 <= kstar)
            acc += std::pow(double(q.p), o / 2);
    }
    return acc;
}

} // namespace

BoundReport singular_count_report(const PhaseParams& params, int kappa, const SingularCensus& census,
                                  const SqrtBranch& branch) {
    const u64 count = singular_count(params, kappa, branch);
    const int r = rho(params.k, census.special_values, params.q);
    const double rhs = r < 0 ? 1.0 : std::pow(double(params.q.p), std::min(r, kappa) / 2);
    auto rep = BoundReport::make("singular-count", double(count), rhs);
    rep.params = {{"p", double(params.q.p)}, {"s", double(params.q.s)}, {"kappa", double(kappa)},
                  {"A", double(params.A)},   {"B", double(params.B)},   {"a", double(params.a)},
                  {"k", double(params.k)},   {"rho", double(r)},        {"omega", double(census.roots.size())},
                  {"s_i_sum", s_i_sum(params.k, kappa, census, params.q)}};
    return rep;
}

BoundReport singular_count_report_T(const PhaseParams& params, int kappa, const SingularCensus& census,
                                    const SqrtBranch& branch) {
    const u64 count = singular_count(params, kappa, branch);
    const i64 Q = static_cast<i64>(params.q.q);
    const i64 l = mulq(mulq(params.k, params.k, Q), params.a, Q);
    const int r = rho(l, census.setT, params.q);
    const double rhs = r < 0 ? 1.0 : std::pow(double(params.q.p), std::min(r, kappa) / 2);
    auto rep = BoundReport::make("singular-count-T", double(count), rhs);
    rep.params = {{"p", double(params.q.p)}, {"s", double(params.q.s)}, {"kappa", double(kappa)},
                  {"A", double(params.A)},   {"B", double(params.B)},   {"a", double(params.a)},
                  {"k", double(params.k)},   {"rho_T", double(r)},      {"T_size", double(census.setT.size())}};
    return rep;
}

} // namespace kloosterlab
