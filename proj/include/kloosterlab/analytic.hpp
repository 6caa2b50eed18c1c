#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "kloosterlab/common.hpp"
#include "kloosterlab/hecke.hpp"

namespace kloosterlab {

// log Gamma(z) for complex z off the poles (Stirling after shifting Re z
// above 15); the imaginary part is a continuous branch, fine for exp().
cplx lgamma_complex(cplx z);

// J_nu(x) for integer 0 <= nu <= 60 and x >= 0. Power series in __float128
// for x <= max(30, nu); above that the Hankel expansion for J_0, J_1 and
// upward recurrence (stable for nu < x).
double bessel_j(int nu, double x);

// ---------------------------------------------------------------------------
// Weight of the approximate functional equation

struct WeightW {
    int k1 = 12, k2 = 12;
    double T_mellin = 40.0;  // starting truncation height, raised as needed
    double sigma = 2.0;      // abscissa used for x >= 1
};

// (1/2 pi i) int_{(sigma)} G(s) x^{-s} ds/s with
// G(s) = Gamma(k1/2+s) Gamma(k2/2+s) / ((2 pi)^{2s} Gamma(k1/2) Gamma(k2/2)).
// sigma may be negative (above -min(k)/2); the residue 1 at s = 0 is then
// added. T is doubled until the integrand at the cut is below 1e-14.
double weight_w_contour(const WeightW& W, double x, double sigma);

// W(x): the abscissa W.sigma for x >= 1, and -min(k1,k2)/4 with the residue
// for x < 1 (so that x^{-s} stays small).
double weight_w(const WeightW& W, double x);

// x W'(x) = -(1/2 pi i) int G(s) x^{-s} ds, on the same contours.
double weight_w_log_derivative(const WeightW& W, double x);

// W tabulated on a uniform grid in log x from x_min up to the cut x_cut,
// above which |W| and |x W'| are below tol; cubic Hermite interpolation in
// log x in between, 0 beyond the cut.
class WeightTable {
public:
    WeightTable(const WeightW& W, double x_min, double tol = 1e-12, int per_unit = 256);
    double operator()(double x) const;
    double x_cut() const { return x_cut_; }
    const WeightW& weight() const { return W_; }

private:
    WeightW W_;
    double h_, u0_ = 0.0, x_cut_ = 0.0;
    std::vector<double> w_, dw_;
};

// ---------------------------------------------------------------------------
// Hankel transform and Voronoi summation

// exp(beta - beta/(1 - t^2)) with t = 2x - 3: supported in [1, 2], peak 1
// at x = 3/2. Larger beta narrows the bump and speeds up the decay of its
// Hankel transform.
struct BumpFunction {
    double beta = 10.0;
    double operator()(double x) const;
};

using RealFunction = std::function<double(double)>;

// 2 pi i^k int_1^2 V(x) J_{k-1}(4 pi sqrt(xy)) dx by composite Gauss-Legendre
// with the panel count scaled to the oscillation. V must vanish outside [1,2].
cplx hankel_transform(const RealFunction& V, int k, double y);

// The same through `parts` integrations by parts:
// (-1/(2 pi sqrt y))^j int d^j/dx^j (V(x) x^{-(k-1)/2}) x^{(k-1+j)/2} J_{k-1+j}(..) dx,
// with the derivative taken by central differences. For cross-checks.
cplx hankel_transform_by_parts(const RealFunction& V, int k, double y, int parts);

struct VoronoiResult {
    cplx lhs = 0.0, rhs = 0.0;
    double residual = 0.0;
    u64 terms_rhs = 0;  // dual terms used before the tail fell below 1e-10
};

// Both sides of the Voronoi formula for sum lambda(n) e(bn/c) V(n/N).
// Requires (b, c) = 1, c <= 10, N <= 50. Throws std::out_of_range if the
// coefficient table cannot cover the dual sum.
VoronoiResult voronoi_residual(const Newform& f, i64 b, u64 c, const RealFunction& V, double N);

// ---------------------------------------------------------------------------
// Circle method

struct CircleApprox {
    double Q = 50.0;
    double delta = 0.02;
    std::vector<std::pair<u64, double>> w;  // (c, w(c)), c in [Q, 2Q], 0 <= w <= 1

    static CircleApprox uniform(u64 Q, double delta);  // w = 1 on [Q, 2Q]
};

struct JutilaResult {
    double Lambda = 0.0;
    double mass = 0.0;      // int_0^1 I~, equal to 1
    double l2_error = 0.0;  // int_0^1 (1 - I~)^2
    double bound = 0.0;     // Q^2 eps_proxy(Q) / (delta Lambda^2)
};

// Exact integration of the piecewise-constant I~ on R/Z (intervals wrap
// mod 1). Rejects Lambda = 0 and delta outside [Q^-2, Q^-1].
JutilaResult jutila_approximation(const CircleApprox& ca, double eps_power = 2.0);

} // namespace kloosterlab
