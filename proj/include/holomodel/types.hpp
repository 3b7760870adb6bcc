#pragma once

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "holomodel/errors.hpp"

namespace holomodel {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr Complex kImagUnit{0.0, 1.0};

// Hermitian product <z,w> = sum z_i conj(w_i).
inline Complex herm(const CVec& z, const CVec& w) { return w.dot(z); }

inline double sup_mod(const CVec& z) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) m = std::max(m, std::abs(z[i]));
    return m;
}

inline bool all_finite(const CVec& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (!std::isfinite(z[i].real()) || !std::isfinite(z[i].imag())) return false;
    return true;
}

inline CVec cvec1(Complex z) {
    CVec v(1);
    v[0] = z;
    return v;
}

enum class DomainKind { Ball, Polydisc, Siegel };

inline std::string domain_kind_name(DomainKind k) {
    switch (k) {
        case DomainKind::Ball: return "ball";
        case DomainKind::Polydisc: return "polydisc";
        case DomainKind::Siegel: return "siegel";
    }
    return "?";
}

struct DomainSpec {
    DomainKind kind = DomainKind::Ball;
    int dim = 1;

    static DomainSpec ball(int q) { return {DomainKind::Ball, q}; }
    static DomainSpec polydisc(int q) { return {DomainKind::Polydisc, q}; }
    static DomainSpec siegel(int q) { return {DomainKind::Siegel, q}; }

    bool operator==(const DomainSpec& o) const { return kind == o.kind && dim == o.dim; }
    bool operator!=(const DomainSpec& o) const { return !(*this == o); }

    // Positive inside the domain, zero on the boundary.
    // Ball: 1 - |z|; polydisc: 1 - max_i |z_i|; Siegel: Im z_1 - |w|^2.
    double boundary_gap(const CVec& z) const {
        switch (kind) {
            case DomainKind::Ball: return 1.0 - z.norm();
            case DomainKind::Polydisc: return 1.0 - sup_mod(z);
            case DomainKind::Siegel: {
                double h = z[0].imag();
                for (Eigen::Index i = 1; i < z.size(); ++i) h -= std::norm(z[i]);
                return h;
            }
        }
        return 0.0;
    }

    bool contains(const CVec& z, double slack = 0.0) const {
        if (z.size() != dim || !all_finite(z)) return false;
        return boundary_gap(z) > -slack;
    }

    void require_inside(const CVec& z, double slack = 0.0) const {
        if (!contains(z, slack))
            throw PointOutsideDomain("point outside " + domain_kind_name(kind) +
                                     "(" + std::to_string(dim) + ")");
    }

    std::string name() const { return domain_kind_name(kind) + "(" + std::to_string(dim) + ")"; }
};

// Boundary point of the ball/polydisc (unit representative), or the point at
// infinity of the Siegel half-space.
struct BoundaryPoint {
    CVec direction;
    bool infinity = false;

    static BoundaryPoint at_infinity(int q) {
        BoundaryPoint b;
        b.direction = CVec::Zero(q);
        b.infinity = true;
        return b;
    }
    static BoundaryPoint of(const CVec& d) { return BoundaryPoint{d, false}; }

    int dim() const { return static_cast<int>(direction.size()); }
};

} // namespace holomodel
