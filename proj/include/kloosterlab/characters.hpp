#pragma once

#include <memory>
#include <vector>

#include "kloosterlab/arith.hpp"

namespace kloosterlab {

class DirichletCharacter;

// (Z/qZ)^* as a product of cyclic groups with explicit generators; for
// 2^k (k >= 3) the pair {-1, 5} is used.
class CharacterGroup {
public:
    struct Component {
        u64 prime;
        int exponent;
        u64 modulus;    // p^e
        i64 generator;  // residue mod p^e (-1 for the sign generator)
        u64 order;
    };

    static std::shared_ptr<const CharacterGroup> create(u64 q);

    u64 modulus() const { return q_; }
    u64 phi() const { return phi_; }
    // lcm of the generator orders; character values are e(E/root_order)
    u64 root_order() const { return L_; }
    const std::vector<Component>& components() const { return comps_; }

    bool is_unit(i64 n) const { return unit_[static_cast<std::size_t>(mod(n, static_cast<i64>(q_)))]; }
    // Discrete logarithms of a unit n along each generator.
    const int* logs(i64 n) const {
        return logs_.data() + static_cast<std::size_t>(mod(n, static_cast<i64>(q_))) * comps_.size();
    }

    std::vector<DirichletCharacter> characters() const;
    std::vector<DirichletCharacter> primitive_characters() const;
    DirichletCharacter character(std::vector<u64> exponents) const;

private:
    explicit CharacterGroup(u64 q);
    u64 q_;
    u64 phi_ = 1;
    u64 L_ = 1;
    std::vector<Component> comps_;
    std::vector<int> logs_;
    std::vector<bool> unit_;
    std::weak_ptr<const CharacterGroup> self_;
};

// chi(n) = e(E(n)/L) with E(n) = sum_i j_i log_i(n) L/ord_i, so values are
// kept as exact exponents and turned into floats only on request.
class DirichletCharacter {
public:
    DirichletCharacter(std::shared_ptr<const CharacterGroup> group, std::vector<u64> exponents);

    const CharacterGroup& group() const { return *group_; }
    u64 modulus() const { return group_->modulus(); }
    const std::vector<u64>& exponents() const { return exps_; }
    u64 conductor() const { return conductor_; }
    bool is_primitive() const { return conductor_ == group_->modulus(); }
    u64 order() const;

    // -1 when gcd(n, q) > 1, otherwise E(n) in [0, L)
    i64 value_exponent(i64 n) const;
    cplx operator()(i64 n) const;
    DirichletCharacter conj() const;

private:
    std::shared_ptr<const CharacterGroup> group_;
    std::vector<u64> exps_;
    std::vector<u64> weight_;  // L/ord_i * j_i mod L
    u64 conductor_ = 1;
};

std::vector<DirichletCharacter> enumerate_characters(u64 q);

// Number of primitive characters mod q: sum_{d | q} phi(d) mu(q/d).
u64 psi_count(u64 q);

// sum over primitive chi mod q of chi(n), computed by direct summation and
// by sum_{d | (n-1, q)} phi(d) mu(q/d); throws std::logic_error on mismatch.
i64 orthogonality_sum(u64 q, i64 n);
i64 orthogonality_closed_form(u64 q, i64 n);

// Smallest period of n -> chi(n) restricted to units (brute force oracle
// for the conductor).
u64 conductor_by_period(const DirichletCharacter& chi);

} // namespace kloosterlab
