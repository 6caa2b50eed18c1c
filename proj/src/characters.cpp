#include "kloosterlab/characters.hpp"

#include <numeric>
#include <stdexcept>

namespace kloosterlab {

CharacterGroup::CharacterGroup(u64 q) : q_(q) {
    if (q == 0) throw std::invalid_argument("CharacterGroup: q must be positive");
    if (q > 10'000'000) throw std::invalid_argument("CharacterGroup: q too large for tabulation");
    auto fac = factorize(q);
    for (auto [p, e] : fac.factors) {
        u64 pe = ipow(p, e);
        if (p == 2) {
            if (e == 1) continue;  // trivial unit group
            comps_.push_back({2, e, pe, -1, 2});
            if (e >= 3) comps_.push_back({2, e, pe, 5, pe / 4});
        } else {
            comps_.push_back({p, e, pe, static_cast<i64>(primitive_root(p, e)), pe / p * (p - 1)});
        }
    }
    phi_ = fac.euler_phi();
    for (auto& c : comps_) L_ = std::lcm(L_, c.order);

    const std::size_t r = comps_.size();
    logs_.assign(q * r, -1);
    unit_.assign(q, false);
    for (u64 n = 0; n < q; ++n) unit_[n] = gcd(n, q) == 1;
    if (q == 1) unit_[0] = true;

    // per component: log table on residues mod p^e
    std::vector<std::vector<int>> tab(r);
    for (std::size_t i = 0; i < r; ++i) {
        const auto& c = comps_[i];
        tab[i].assign(c.modulus, -1);
        if (c.prime == 2) {
            // n = (-1)^a 5^b mod 2^e; component i is the sign or the 5-part
            bool sign_part = c.generator == -1;
            u64 m = c.modulus;
            u64 five = 1;
            u64 nb = (c.exponent >= 3) ? m / 4 : 1;
            for (u64 b = 0; b < nb; ++b) {
                u64 pos = five % m, neg = (m - five % m) % m;
                tab[i][pos] = sign_part ? 0 : static_cast<int>(b);
                tab[i][neg] = sign_part ? 1 : static_cast<int>(b);
                five = five * 5 % m;
            }
        } else {
            u64 g = static_cast<u64>(c.generator), x = 1;
            for (u64 k = 0; k < c.order; ++k) {
                tab[i][x] = static_cast<int>(k);
                x = mulmod(x, g, c.modulus);
            }
        }
    }
    for (u64 n = 0; n < q; ++n) {
        if (!unit_[n]) continue;
        for (std::size_t i = 0; i < r; ++i) logs_[n * r + i] = tab[i][n % comps_[i].modulus];
    }
}

std::shared_ptr<const CharacterGroup> CharacterGroup::create(u64 q) {
    auto g = std::shared_ptr<CharacterGroup>(new CharacterGroup(q));
    g->self_ = g;
    return g;
}

DirichletCharacter CharacterGroup::character(std::vector<u64> exponents) const {
    return DirichletCharacter(self_.lock(), std::move(exponents));
}

std::vector<DirichletCharacter> CharacterGroup::characters() const {
    std::vector<DirichletCharacter> out;
    out.reserve(phi_);
    std::vector<u64> j(comps_.size(), 0);
    while (true) {
        out.push_back(character(j));
        std::size_t i = 0;
        for (; i < j.size(); ++i) {
            if (++j[i] < comps_[i].order) break;
            j[i] = 0;
        }
        if (i == j.size()) break;
    }
    return out;
}

std::vector<DirichletCharacter> CharacterGroup::primitive_characters() const {
    std::vector<DirichletCharacter> out;
    for (auto& chi : characters())
        if (chi.is_primitive()) out.push_back(chi);
    return out;
}

DirichletCharacter::DirichletCharacter(std::shared_ptr<const CharacterGroup> group, std::vector<u64> exponents)
    : group_(std::move(group)), exps_(std::move(exponents)) {
    const auto& comps = group_->components();
    if (exps_.size() != comps.size()) throw std::invalid_argument("DirichletCharacter: exponent vector size mismatch");
    const u64 L = group_->root_order();
    weight_.resize(exps_.size());
    conductor_ = 1;
    u64 cond2 = 1;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps[i];
        exps_[i] %= c.order;
        weight_[i] = (L / c.order) * exps_[i] % L;
        u64 o = c.order / std::gcd(c.order, exps_[i] == 0 ? c.order : exps_[i]);
        if (exps_[i] == 0) o = 1;
        if (c.prime == 2) {
            if (c.generator == -1) {
                if (o > 1) cond2 = std::max<u64>(cond2, 4);
            } else if (o > 1) {
                cond2 = std::max<u64>(cond2, o * 4);  // o = 2^t gives 2^{t+2}
            }
        } else if (o > 1) {
            u64 pt = 1;
            while (o % c.prime == 0) {
                o /= c.prime;
                pt *= c.prime;
            }
            conductor_ *= pt * c.prime;
        }
    }
    conductor_ *= cond2;
}

u64 DirichletCharacter::order() const {
    u64 L = group_->root_order();
    u64 g = L;
    for (u64 w : weight_) g = std::gcd(g, w);
    return L / g;
}

i64 DirichletCharacter::value_exponent(i64 n) const {
    if (!group_->is_unit(n)) return -1;
    const u64 L = group_->root_order();
    const int* lg = group_->logs(n);
    u64 E = 0;
    for (std::size_t i = 0; i < weight_.size(); ++i) E = (E + mulmod(weight_[i], static_cast<u64>(lg[i]), L)) % L;
    return static_cast<i64>(E);
}

cplx DirichletCharacter::operator()(i64 n) const {
    i64 E = value_exponent(n);
    if (E < 0) return 0.0;
    return e_frac(E, static_cast<i64>(group_->root_order()));
}

DirichletCharacter DirichletCharacter::conj() const {
    std::vector<u64> j(exps_.size());
    const auto& comps = group_->components();
    for (std::size_t i = 0; i < j.size(); ++i) j[i] = (comps[i].order - exps_[i]) % comps[i].order;
    return DirichletCharacter(group_, j);
}

std::vector<DirichletCharacter> enumerate_characters(u64 q) { return CharacterGroup::create(q)->characters(); }

u64 psi_count(u64 q) {
    auto fac = factorize(q);
    i64 total = 0;
    for (u64 d : fac.divisors()) total += static_cast<i64>(euler_phi(d)) * moebius(q / d);
    return static_cast<u64>(total);
}

i64 orthogonality_closed_form(u64 q, i64 n) {
    u64 g = gcd_signed(n - 1, static_cast<i64>(q));
    if (n == 1 || g == 0) g = q;
    i64 total = 0;
    for (u64 d : factorize(g).divisors()) total += static_cast<i64>(euler_phi(d)) * moebius(q / d);
    return total;
}

i64 orthogonality_sum(u64 q, i64 n) {
    if (gcd_signed(n, static_cast<i64>(q)) != 1) throw std::invalid_argument("orthogonality_sum: n must be coprime to q");
    auto group = CharacterGroup::create(q);
    // exact: count exponents by residue class, then sum roots of unity
    const u64 L = group->root_order();
    std::vector<i64> hist(L, 0);
    for (auto& chi : group->primitive_characters()) ++hist[static_cast<std::size_t>(chi.value_exponent(n))];
    cplx s = 0;
    for (u64 E = 0; E < L; ++E)
        if (hist[E]) s += static_cast<double>(hist[E]) * e_frac(static_cast<i64>(E), static_cast<i64>(L));
    i64 direct = std::llround(s.real());
    if (std::abs(s.imag()) > 1e-6 || std::abs(s.real() - static_cast<double>(direct)) > 1e-6)
        throw std::logic_error("orthogonality_sum: direct sum is not an integer");
    i64 closed = orthogonality_closed_form(q, n);
    if (direct != closed) throw std::logic_error("orthogonality_sum: direct and closed forms disagree");
    return direct;
}

u64 conductor_by_period(const DirichletCharacter& chi) {
    u64 q = chi.modulus();
    for (u64 d : factorize(q).divisors()) {
        bool ok = true;
        for (u64 n = 1; n < q && ok; n += d)
            if (gcd(n, q) == 1 && chi.value_exponent(static_cast<i64>(n)) != 0) ok = false;
        if (ok) return d;
    }
    return q;
}

} // namespace kloosterlab
