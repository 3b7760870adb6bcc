#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "holomodel/types.hpp"

namespace holomodel {

// Distances are the Kobayashi distance in the atanh normalization:
// k_D(0, r) = atanh(r), and the infinitesimal metric at the origin of the
// disc is |v|.  Divergence-rate style quantities elsewhere use doubled
// lengths (see dynamics.hpp).

namespace detail {

// dist = atanh(s) with s^2 = 1 - G, written so that near-boundary pairs
// (G -> 0) go through log(G) instead of atanh(1 - eps).
inline double dist_from_gap_product(double G) {
    G = std::clamp(G, 0.0, 1.0);
    double s = std::sqrt(std::max(0.0, 1.0 - G));
    if (s < 0.5) return std::atanh(s);
    if (G <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 * std::log((1.0 + s) * (1.0 + s) / G);
}

} // namespace detail

inline double poincare_disc(Complex a, Complex b) {
    double G = (1.0 - std::norm(a)) * (1.0 - std::norm(b)) / std::norm(1.0 - std::conj(a) * b);
    if (G > 0.75) // close pair: the direct pseudo-hyperbolic form has no cancellation
        return std::atanh(std::abs((a - b) / (1.0 - std::conj(a) * b)));
    return detail::dist_from_gap_product(G);
}

// Standard ball involution: phi_a(a) = 0, phi_a(0) = a, phi_a o phi_a = id.
// Convention: at a = 0 this returns the identity (not -z), so that
// mobius_to_origin(0) is the identity automorphism.
inline CVec ball_involution(const CVec& a, const CVec& z) {
    double na2 = a.squaredNorm();
    if (na2 < 1e-30) return z;
    double s = std::sqrt(std::max(0.0, 1.0 - na2));
    Complex za = herm(z, a);
    CVec Pz = (za / na2) * a;
    CVec Qz = z - Pz;
    return (a - Pz - s * Qz) / (1.0 - za);
}

inline CVec cayley_siegel_to_ball(const CVec& Z) {
    CVec z(Z.size());
    const Complex d = Z[0] + kImagUnit;
    z[0] = (Z[0] - kImagUnit) / d;
    for (Eigen::Index j = 1; j < Z.size(); ++j) z[j] = 2.0 * kImagUnit * Z[j] / d;
    return z;
}

// Siegel polarization <<P,Q>> = (z - conj(z')) / 2i - <w, w'>;  the height
// <<P,P>> = Im z - |w|^2 is the boundary gap.  Well conditioned at large
// coordinates, unlike pulling back through the Cayley map.
inline Complex siegel_pairing(const CVec& P, const CVec& Q) {
    Complex s = (P[0] - std::conj(Q[0])) / (2.0 * kImagUnit);
    for (Eigen::Index i = 1; i < P.size(); ++i) s -= P[i] * std::conj(Q[i]);
    return s;
}

inline double siegel_distance(const CVec& P, const CVec& Q) {
    if (P.size() == 1) // half-plane: exact at every scale
        return std::atanh(std::abs((P[0] - Q[0]) / (P[0] - std::conj(Q[0]))));
    double hP = siegel_pairing(P, P).real();
    double hQ = siegel_pairing(Q, Q).real();
    double G = hP * hQ / std::norm(siegel_pairing(P, Q));
    if (G > 0.75 && sup_mod(P) < 1e3 && sup_mod(Q) < 1e3) {
        CVec a = cayley_siegel_to_ball(P), b = cayley_siegel_to_ball(Q);
        return std::atanh(ball_involution(a, b).norm());
    }
    return detail::dist_from_gap_product(G);
}

inline double kobayashi_distance(const DomainSpec& X, const CVec& p, const CVec& q) {
    X.require_inside(p);
    X.require_inside(q);
    switch (X.kind) {
        case DomainKind::Ball: {
            double G = (1.0 - p.squaredNorm()) * (1.0 - q.squaredNorm()) /
                       std::norm(1.0 - herm(p, q));
            if (G > 0.75) return std::atanh(ball_involution(p, q).norm());
            return detail::dist_from_gap_product(G);
        }
        case DomainKind::Polydisc: {
            double d = 0.0;
            for (Eigen::Index i = 0; i < p.size(); ++i)
                d = std::max(d, poincare_disc(p[i], q[i]));
            return d;
        }
        case DomainKind::Siegel:
            return siegel_distance(p, q);
    }
    return 0.0;
}

// Jacobian of the inverse Cayley map H^q -> B^q at Z, applied to v.
inline CVec inverse_cayley_differential(const CVec& Z, const CVec& v) {
    const Complex d = Z[0] + kImagUnit;
    const Complex c2 = 2.0 * kImagUnit;
    CVec out(Z.size());
    out[0] = c2 / (d * d) * v[0];
    for (Eigen::Index j = 1; j < Z.size(); ++j)
        out[j] = c2 / d * v[j] - c2 * Z[j] / (d * d) * v[0];
    return out;
}

inline CVec cayley_ball_to_siegel(const CVec& z) {
    const Complex one_minus = 1.0 - z[0];
    if (std::abs(one_minus) < 1e-15)
        throw SingularAtBoundary("cayley transform singular at z_1 = 1 (image is the point at infinity)");
    CVec Z(z.size());
    Z[0] = kImagUnit * (1.0 + z[0]) / one_minus;
    for (Eigen::Index j = 1; j < z.size(); ++j) Z[j] = z[j] / one_minus;
    return Z;
}

enum class CayleyDirection { BallToSiegel, SiegelToBall };

inline CVec cayley_transform(const CVec& p, CayleyDirection dir) {
    return dir == CayleyDirection::BallToSiegel ? cayley_ball_to_siegel(p)
                                                : cayley_siegel_to_ball(p);
}

// Boundary version: z_1 = 1 maps to infinity and back.
inline BoundaryPoint cayley_boundary_to_siegel(const BoundaryPoint& zeta) {
    if (std::abs(1.0 - zeta.direction[0]) < 1e-12)
        return BoundaryPoint::at_infinity(zeta.dim());
    return BoundaryPoint::of(cayley_ball_to_siegel(zeta.direction));
}

inline BoundaryPoint cayley_boundary_to_ball(const BoundaryPoint& Z) {
    if (Z.infinity) {
        CVec e1 = CVec::Zero(Z.dim());
        e1[0] = 1.0;
        return BoundaryPoint::of(e1);
    }
    return BoundaryPoint::of(cayley_siegel_to_ball(Z.direction));
}

inline double kobayashi_metric(const DomainSpec& X, const CVec& p, const CVec& v) {
    X.require_inside(p);
    if (v.size() != X.dim) throw DomainMismatch("tangent vector dimension mismatch");
    switch (X.kind) {
        case DomainKind::Ball: {
            double g = 1.0 - p.squaredNorm();
            double num = g * v.squaredNorm() + std::norm(herm(v, p));
            return std::sqrt(num) / g;
        }
        case DomainKind::Polydisc: {
            double m = 0.0;
            for (Eigen::Index i = 0; i < p.size(); ++i)
                m = std::max(m, std::abs(v[i]) / (1.0 - std::norm(p[i])));
            return m;
        }
        case DomainKind::Siegel: {
            CVec z = cayley_siegel_to_ball(p);
            CVec dv = inverse_cayley_differential(p, v);
            return kobayashi_metric(DomainSpec::ball(X.dim), z, dv);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Automorphisms used as renormalizing frames.

inline Complex disc_involution(Complex a, Complex z) {
    if (std::norm(a) < 1e-30) return z;
    return (a - z) / (1.0 - std::conj(a) * z);
}

// Moebius + post-rotation automorphism of the ball or polydisc.
// Action: z |-> U * phi_center(z).  For the polydisc the unitary must be
// diagonal (coordinate phases); general unitaries do not preserve it.
struct BallAutomorphism {
    DomainSpec domain;
    CVec center;
    CMat unitary;

    CVec apply(const CVec& z) const {
        if (domain.kind == DomainKind::Polydisc) {
            CVec out(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i)
                out[i] = unitary(i, i) * disc_involution(center[i], z[i]);
            return out;
        }
        return unitary * ball_involution(center, z);
    }

    CVec apply_inverse(const CVec& z) const {
        if (domain.kind == DomainKind::Polydisc) {
            CVec out(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i)
                out[i] = disc_involution(center[i], std::conj(unitary(i, i)) * z[i]);
            return out;
        }
        return ball_involution(center, unitary.adjoint() * z);
    }

    bool is_identity(double tol = 1e-14) const {
        return center.norm() < tol && (unitary - CMat::Identity(domain.dim, domain.dim)).norm() < tol;
    }
};

inline BallAutomorphism mobius_to_origin(const DomainSpec& X, const CVec& a) {
    X.require_inside(a);
    if (X.kind == DomainKind::Siegel)
        throw DomainMismatch("mobius_to_origin expects a bounded realization (ball or polydisc)");
    return BallAutomorphism{X, a, CMat::Identity(X.dim, X.dim)};
}

namespace detail {

// Deterministic unitary with U u = |u| e_1 (orthonormal completion of u).
inline CMat unitary_aligning_to_first_axis(const CVec& u) {
    const int q = static_cast<int>(u.size());
    CMat B(q, q);
    B.col(0) = u / u.norm();
    int col = 1;
    for (int j = 0; j < q && col < q; ++j) {
        CVec w = CVec::Zero(q);
        w[j] = 1.0;
        for (int c = 0; c < col; ++c) w -= B.col(c) * B.col(c).dot(w);
        if (w.norm() > 0.5) B.col(col++) = w / w.norm();
    }
    // remaining candidates (happens only when an e_j was nearly parallel to u)
    for (int j = 0; j < q && col < q; ++j) {
        CVec w = CVec::Zero(q);
        w[j] = 1.0;
        for (int c = 0; c < col; ++c) w -= B.col(c) * B.col(c).dot(w);
        if (w.norm() > 1e-8) B.col(col++) = w / w.norm();
    }
    return B.adjoint();
}

} // namespace detail

// Frame centered at a whose unitary part turns the image of `toward` onto the
// positive first axis (polydisc: positive real in every active coordinate).
// This is the gauge that makes renormalized compositions of automorphisms
// stabilize exactly instead of drifting by rotations.
inline BallAutomorphism frame_to_origin(const DomainSpec& X, const CVec& a, const CVec& toward) {
    BallAutomorphism A = mobius_to_origin(X, a);
    if (X.kind == DomainKind::Polydisc) {
        CMat U = CMat::Identity(X.dim, X.dim);
        for (int i = 0; i < X.dim; ++i) {
            Complex u = disc_involution(a[i], toward[i]);
            if (std::abs(u) > 1e-13) U(i, i) = std::conj(u) / std::abs(u);
        }
        A.unitary = U;
        return A;
    }
    CVec u = ball_involution(a, toward);
    if (u.norm() > 1e-13) A.unitary = detail::unitary_aligning_to_first_axis(u);
    return A;
}

// ---------------------------------------------------------------------------
// Koranyi regions and approach classes of boundary sequences.

inline bool koranyi_contains(const BoundaryPoint& zeta, double R, const CVec& z) {
    if (R <= 1.0) throw AmplitudeOutOfRange("Koranyi amplitude must be > 1");
    if (zeta.infinity) throw DomainMismatch("Koranyi region needs a finite ball boundary vertex");
    DomainSpec::ball(zeta.dim()).require_inside(z);
    return std::abs(1.0 - herm(z, zeta.direction)) < R * (1.0 - z.norm());
}

struct SpecialRestrictedFlags {
    bool restricted = false;
    bool special = false;
    double max_stolz_ratio = 0.0; // over the inspected tail
    double final_gap = 0.0;       // |1 - <z_N, zeta>|
    double final_special_dist = 0.0;
};

struct ApproachOptions {
    double stolz_aperture = 4.0;
    double tail_fraction = 0.5;
    int min_length = 16;
};

namespace detail {
inline double least_squares_slope(const std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += i;
        sy += y[i];
        sxx += double(i) * i;
        sxy += double(i) * y[i];
    }
    double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}
} // namespace detail

// restricted: <z_n, zeta> -> 1 inside a Stolz region of aperture M;
// special:    k(z_n, <z_n,zeta> zeta) -> 0 with non-increasing trend.
inline SpecialRestrictedFlags check_special_restricted(const std::vector<CVec>& seq,
                                                       const BoundaryPoint& zeta, double tol,
                                                       const ApproachOptions& opts = {}) {
    if (static_cast<int>(seq.size()) < opts.min_length)
        throw SequenceTooShort("need at least " + std::to_string(opts.min_length) + " points");
    const DomainSpec ball = DomainSpec::ball(zeta.dim());
    for (const auto& z : seq) ball.require_inside(z);

    const int n = static_cast<int>(seq.size());
    const int tail0 = std::min(n - 2, static_cast<int>(n * (1.0 - opts.tail_fraction)));

    SpecialRestrictedFlags flags;
    std::vector<double> kvals;
    double first_gap = 0.0;
    for (int i = tail0; i < n; ++i) {
        Complex w = herm(seq[i], zeta.direction);
        double gap = std::abs(1.0 - w);
        double denom = 1.0 - std::abs(w);
        double ratio = denom > 0.0 ? gap / denom : std::numeric_limits<double>::infinity();
        flags.max_stolz_ratio = std::max(flags.max_stolz_ratio, ratio);
        if (i == tail0) first_gap = gap;
        if (i == n - 1) flags.final_gap = gap;
        kvals.push_back(kobayashi_distance(ball, seq[i], CVec(w * zeta.direction)));
    }
    flags.final_special_dist = kvals.back();
    bool approaches = flags.final_gap <= 0.75 * first_gap + 1e-12;
    flags.restricted = approaches && flags.max_stolz_ratio <= opts.stolz_aperture;
    flags.special = kvals.back() <= tol && detail::least_squares_slope(kvals) <= 1e-12;
    return flags;
}

} // namespace holomodel
