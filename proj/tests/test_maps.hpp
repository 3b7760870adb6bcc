#pragma once

// Shared rational test maps with exactly known dynamics.

#include <holomodel/map_expr.hpp>

namespace testmaps {

using namespace holomodel;

inline Poly upoly(const std::vector<Complex>& coeffs) {
    Poly p(1);
    for (std::size_t k = 0; k < coeffs.size(); ++k) p.add_term({static_cast<int>(k)}, coeffs[k]);
    return p;
}

inline MapExpr disc_map(const std::vector<Complex>& num, const std::vector<Complex>& den,
                        const std::string& label) {
    return MapExpr(DomainSpec::ball(1), {{upoly(num), upoly(den)}}, label);
}

// Hyperbolic disc automorphism, Denjoy-Wolff 1 with dilation 1/3, repelling -1
// with dilation 3.
inline MapExpr aut_hyperbolic() { return disc_map({1.0, 2.0}, {2.0, 1.0}, "(2z+1)/(z+2)"); }

// Hyperbolic non-automorphism, Denjoy-Wolff 1 with dilation 1/2.
inline MapExpr half_affine() { return disc_map({0.5, 0.5}, {1.0}, "(z+1)/2"); }

// Elliptic contraction fixing 0.
inline MapExpr contraction_half() { return disc_map({0.0, 0.5}, {1.0}, "z/2"); }

// Elliptic rotation fixing 0 (no orbit convergence).
inline MapExpr rotation_i() { return disc_map({0.0, Complex(0.0, 1.0)}, {1.0}, "iz"); }

// z^2: attracting interior 0, repelling boundary 1 with dilation 2.
inline MapExpr squaring() { return disc_map({0.0, 0.0, 1.0}, {1.0}, "z^2"); }

// Cayley conjugate of w -> w+1: parabolic automorphism with Denjoy-Wolff 1.
// ((2i-1)z + 1) / (-z + 1 + 2i)
inline MapExpr parabolic_translation() {
    return disc_map({1.0, Complex(-1.0, 2.0)}, {Complex(1.0, 2.0), -1.0}, "cayley[w+1]");
}

// Blaschke product z(z+1/2)/(1+z/2): elliptic with DW 0, repelling 1
// with dilation 4/3.
inline MapExpr blaschke_repelling() {
    return disc_map({0.0, 0.5, 1.0}, {1.0, 0.5}, "z(z+.5)/(1+.5z)");
}

// ((2z+1)/(z+2), w/2) on the bidisc: rank collapses to 1.
inline MapExpr polydisc_collapse() {
    Poly num1(2), den1(2), num2(2), den2(2);
    num1.add_term({0, 0}, 1.0);
    num1.add_term({1, 0}, 2.0);
    den1.add_term({0, 0}, 2.0);
    den1.add_term({1, 0}, 1.0);
    num2.add_term({0, 1}, 0.5);
    den2.add_term({0, 0}, 1.0);
    return MapExpr(DomainSpec::polydisc(2), {{num1, den1}, {num2, den2}}, "(aut,w/2)");
}

inline CVec pt(Complex z) { return cvec1(z); }
inline CVec pt2(Complex z, Complex w) {
    CVec v(2);
    v[0] = z;
    v[1] = w;
    return v;
}

} // namespace testmaps
