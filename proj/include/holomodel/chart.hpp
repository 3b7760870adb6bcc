#pragma once

#include "holomodel/geometry.hpp"
#include "holomodel/map_expr.hpp"
#include "holomodel/types.hpp"

namespace holomodel {

// Unbounded (Siegel upper half-space) realization of the ball, anchored at a
// boundary point zeta: first rotate zeta onto e_1, then apply the Cayley
// transform.  Orbits that crowd the boundary near zeta become sequences of
// large coordinates with full relative precision, which is what the deep
// backward constructions need.

inline MapExpr linear_map_expr(const CMat& M, DomainSpec X) {
    const int q = static_cast<int>(M.rows());
    std::vector<RationalComponent> comps;
    for (int i = 0; i < q; ++i) {
        Poly num(q);
        for (int j = 0; j < q; ++j)
            if (M(i, j) != 0.0) num = num + Poly::variable(q, j, M(i, j));
        comps.push_back({num, Poly::constant(q, 1.0)});
    }
    return MapExpr(X, std::move(comps), "linear");
}

inline MapExpr cayley_map_expr(int q) {
    std::vector<RationalComponent> comps;
    Poly den = Poly::constant(q, 1.0) - Poly::variable(q, 0);
    comps.push_back({Poly::constant(q, kImagUnit) + Poly::variable(q, 0, kImagUnit), den});
    for (int j = 1; j < q; ++j) comps.push_back({Poly::variable(q, j), den});
    return MapExpr(DomainSpec::ball(q), std::move(comps), "cayley");
}

inline MapExpr inverse_cayley_map_expr(int q) {
    std::vector<RationalComponent> comps;
    Poly den = Poly::variable(q, 0) + Poly::constant(q, kImagUnit);
    comps.push_back({Poly::variable(q, 0) - Poly::constant(q, kImagUnit), den});
    for (int j = 1; j < q; ++j) comps.push_back({Poly::variable(q, j, 2.0 * kImagUnit), den});
    return MapExpr(DomainSpec::siegel(q), std::move(comps), "cayley_inv");
}

// Affine Heisenberg frame of H^q: dilation by rho followed by the horospherical
// translation taking (i, 0) to the frame base point.  Exact closed forms.
struct SiegelFrame {
    double rho = 1.0;
    double t = 0.0;
    CVec b; // dim q-1

    static SiegelFrame at(const CVec& V) {
        SiegelFrame g;
        g.b = V.tail(V.size() - 1);
        g.t = V[0].real();
        g.rho = V[0].imag() - g.b.squaredNorm();
        return g;
    }

    CVec apply(const CVec& xi) const {
        const double sr = std::sqrt(rho);
        CVec w = sr * xi.tail(xi.size() - 1);
        Complex wb = b.size() > 0 ? herm(w, b) : Complex(0.0);
        CVec out(xi.size());
        out[0] = rho * xi[0] + t + 2.0 * kImagUnit * wb + kImagUnit * b.squaredNorm();
        out.tail(out.size() - 1) = w + b;
        return out;
    }

    CVec apply_inverse(const CVec& Z) const {
        CVec w = Z.tail(Z.size() - 1) - b;
        Complex wb = b.size() > 0 ? herm(w, b) : Complex(0.0);
        Complex z = Z[0] - t - 2.0 * kImagUnit * wb - kImagUnit * b.squaredNorm();
        CVec out(Z.size());
        out[0] = z / rho;
        out.tail(out.size() - 1) = w / std::sqrt(rho);
        return out;
    }
};

class SiegelChart {
public:
    SiegelChart(const DomainSpec& ball, const BoundaryPoint& zeta)
        : ball_(ball), zeta_(zeta), rot_(CMat::Identity(ball.dim, ball.dim)) {
        if (ball.kind != DomainKind::Ball)
            throw DomainMismatch("Siegel chart requires a ball domain");
        if (zeta.infinity || std::abs(zeta.direction.norm() - 1.0) > 1e-9)
            throw DomainMismatch("chart anchor must be a finite unit boundary point");
        rot_ = detail::unitary_aligning_to_first_axis(zeta.direction);
        siegel_ = DomainSpec::siegel(ball.dim);
    }

    const DomainSpec& siegel_domain() const { return siegel_; }
    const DomainSpec& ball_domain() const { return ball_; }

    CVec base_point() const {
        CVec b = CVec::Zero(ball_.dim);
        b[0] = kImagUnit;
        return b;
    }

    CVec to_chart(const CVec& z) const { return cayley_ball_to_siegel(rot_ * z); }
    CVec from_chart(const CVec& Z) const { return rot_.adjoint() * cayley_siegel_to_ball(Z); }

    // q = 1 only: the chart as a 2x2 Moebius matrix (composable without the
    // precision loss of a bounded-coordinate round trip)
    Eigen::Matrix2cd scalar_to_chart_matrix() const {
        Complex r = rot_(0, 0);
        Eigen::Matrix2cd M;
        M << kImagUnit * r, kImagUnit, -r, 1.0;
        return M;
    }

    double distance(const CVec& P, const CVec& Q) const { return siegel_distance(P, Q); }
    double height(const CVec& P) const { return siegel_pairing(P, P).real(); }

    // Exact rational conjugation Psi o U o f o U^H o Psi^{-1} : H^q -> H^q.
    MapExpr conjugate(const MapExpr& f) const {
        const int q = ball_.dim;
        MapExpr rot = linear_map_expr(rot_, ball_);
        MapExpr rot_inv = linear_map_expr(CMat(rot_.adjoint()), ball_);
        MapExpr inner = compose_symbolic(rot_inv, inverse_cayley_map_expr(q));
        MapExpr mid = compose_symbolic(f, inner);
        MapExpr outer = compose_symbolic(rot, mid);
        return compose_symbolic(cayley_map_expr(q), outer)
            .with_domain(siegel_)
            .with_label(f.label().empty() ? "chart" : f.label() + "@chart");
    }

private:
    DomainSpec ball_;
    BoundaryPoint zeta_;
    CMat rot_;
    DomainSpec siegel_;
};

} // namespace holomodel
