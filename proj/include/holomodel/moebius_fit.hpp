#pragma once

#include <utility>
#include <vector>

#include "holomodel/types.hpp"

namespace holomodel {

// The automorphism tau induced on a retract is recovered numerically by
// sampling and fitting its fractional-linear representation; fixed points,
// multipliers, and normal-form conjugacies then come out of exact 2x2 (or
// (k+1)x(k+1)) matrix algebra instead of boundary iteration.

struct ScalarMoebius {
    Eigen::Matrix2cd M = Eigen::Matrix2cd::Identity();

    Complex apply(Complex z) const {
        return (M(0, 0) * z + M(0, 1)) / (M(1, 0) * z + M(1, 1));
    }
    ScalarMoebius inverse() const {
        Eigen::Matrix2cd N;
        N << M(1, 1), -M(0, 1), -M(1, 0), M(0, 0);
        return {N};
    }
    ScalarMoebius after(const ScalarMoebius& o) const { return {M * o.M}; }
};

struct MoebiusFit {
    ScalarMoebius map;
    double residual = 0.0; // smallest/largest singular value of the design matrix
};

inline MoebiusFit fit_moebius(const std::vector<std::pair<Complex, Complex>>& samples) {
    const int n = static_cast<int>(samples.size());
    CMat A(n, 4);
    for (int i = 0; i < n; ++i) {
        auto [t, s] = samples[i];
        A(i, 0) = t;
        A(i, 1) = 1.0;
        A(i, 2) = -s * t;
        A(i, 3) = -s;
    }
    Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeFullV);
    CVec x = svd.matrixV().col(3);
    MoebiusFit fit;
    fit.map.M << x[0], x[1], x[2], x[3];
    fit.residual = svd.singularValues()(3) / std::max(svd.singularValues()(0), 1e-300);
    return fit;
}

// Fixed-point analysis of a 2x2 Moebius map.  Points are projective: a pair
// (value, at_infinity).
struct ProjPoint {
    Complex value{};
    bool at_infinity = false;
};

struct MoebiusDynamics {
    bool parabolic = false;
    ProjPoint attracting, repelling; // valid when !parabolic
    double multiplier_attracting = 0.0; // |tau'| there, < 1
    ProjPoint parabolic_fixed;          // valid when parabolic
};

inline ProjPoint projectivize(const Eigen::Vector2cd& v) {
    if (std::abs(v[1]) < 1e-12 * std::abs(v[0])) return {0.0, true};
    return {v[0] / v[1], false};
}

inline MoebiusDynamics analyze_moebius(const ScalarMoebius& m, bool expect_parabolic) {
    MoebiusDynamics dyn;
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(m.M);
    Complex mu0 = es.eigenvalues()(0), mu1 = es.eigenvalues()(1);
    dyn.parabolic = expect_parabolic;
    if (expect_parabolic) {
        Complex a = m.M(0, 0), b = m.M(0, 1), c = m.M(1, 0), d = m.M(1, 1);
        if (std::abs(c) < 1e-12 * (std::abs(a) + std::abs(d))) {
            dyn.parabolic_fixed = {0.0, true};
        } else {
            dyn.parabolic_fixed = {(a - d) / (2.0 * c), false};
        }
        (void)b;
        return dyn;
    }
    int big = std::abs(mu0) >= std::abs(mu1) ? 0 : 1;
    int small = 1 - big;
    Complex mu_big = es.eigenvalues()(big), mu_small = es.eigenvalues()(small);
    // derivative at the fixed point of eigenvector v_i is mu_other / mu_i
    dyn.attracting = projectivize(es.eigenvectors().col(big));
    dyn.repelling = projectivize(es.eigenvectors().col(small));
    dyn.multiplier_attracting = std::abs(mu_small / mu_big);
    return dyn;
}

// ---------------------------------------------------------------------------
// Normal-form conjugacies.

// Moebius D -> H with gamma(to_infinity) = infinity and gamma(to_zero) = 0,
// for a pair of distinct boundary points of the disc.
inline ScalarMoebius disc_pair_to_halfplane(Complex to_infinity, Complex to_zero) {
    to_infinity /= std::abs(to_infinity);
    to_zero /= std::abs(to_zero);
    Eigen::Matrix2cd R, W;
    R << 1.0 / to_infinity, 0.0, 0.0, 1.0;
    W << kImagUnit, kImagUnit, -1.0, 1.0; // i(1+z)/(1-z)
    ScalarMoebius g{W * R};
    Complex img = g.apply(to_zero);
    Eigen::Matrix2cd T;
    T << 1.0, -img.real(), 0.0, 1.0;
    return ScalarMoebius{T} .after(g);
}

// Moebius D -> H sending the single boundary point p to infinity.
inline ScalarMoebius disc_point_to_infinity(Complex p) {
    p /= std::abs(p);
    Eigen::Matrix2cd M;
    M << kImagUnit, kImagUnit * p, -1.0, p; // i(p+z)/(p-z)
    return {M};
}

// Real Moebius H -> H with given fixed points sent to infinity / zero.
inline ScalarMoebius halfplane_pair_normalize(const ProjPoint& to_infinity,
                                              const ProjPoint& to_zero) {
    Eigen::Matrix2cd M;
    if (to_infinity.at_infinity) {
        M << 1.0, -to_zero.value.real(), 0.0, 1.0;
    } else if (to_zero.at_infinity) {
        M << 0.0, -1.0, 1.0, -to_infinity.value.real();
    } else {
        M << 1.0, -to_zero.value.real(), 1.0, -to_infinity.value.real();
    }
    if ((M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0)).real() < 0.0) M.row(0) *= -1.0;
    return {M};
}

inline ScalarMoebius halfplane_scale(double s) {
    Eigen::Matrix2cd M;
    M << s, 0.0, 0.0, 1.0;
    return {M};
}

// ---------------------------------------------------------------------------
// Normal forms of automorphisms of H^k (the model side).

enum class ModelKind { PointModel, Hyperbolic, ParabolicAbelian, ParabolicHeisenberg };

inline std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::PointModel: return "point";
        case ModelKind::Hyperbolic: return "hyperbolic";
        case ModelKind::ParabolicAbelian: return "parabolic_abelian";
        case ModelKind::ParabolicHeisenberg: return "parabolic_heisenberg";
    }
    return "?";
}

// phi on H^k:
//   hyperbolic:          (z, w) -> (z/rate, e^{i t_j} w_j / sqrt(rate))
//   parabolic abelian:   (z, w) -> (z + sign, e^{i t_j} w_j)
//   parabolic Heisenberg:(z, w) -> (z - 2 w_1 + i, w_1 - i, e^{i t_j} w_j)
struct NormalForm {
    ModelKind kind = ModelKind::PointModel;
    int k = 0;
    double rate = 1.0; // dilation of the normal form (lambda forward, mu backward)
    int sign = +1;
    std::vector<double> angles; // k-1 entries (Heisenberg: first unused)

    CVec apply(const CVec& v) const {
        CVec out(v.size());
        switch (kind) {
            case ModelKind::PointModel: return v;
            case ModelKind::Hyperbolic: {
                out[0] = v[0] / rate;
                double sq = std::sqrt(rate);
                for (int j = 1; j < k; ++j)
                    out[j] = std::polar(1.0, angles[j - 1]) * v[j] / sq;
                return out;
            }
            case ModelKind::ParabolicAbelian: {
                out[0] = v[0] + double(sign);
                for (int j = 1; j < k; ++j) out[j] = std::polar(1.0, angles[j - 1]) * v[j];
                return out;
            }
            case ModelKind::ParabolicHeisenberg: {
                out[0] = v[0] - 2.0 * v[1] + kImagUnit;
                out[1] = v[1] - kImagUnit;
                for (int j = 2; j < k; ++j) out[j] = std::polar(1.0, angles[j - 1]) * v[j];
                return out;
            }
        }
        return out;
    }

    CVec apply_inverse(const CVec& v) const {
        CVec out(v.size());
        switch (kind) {
            case ModelKind::PointModel: return v;
            case ModelKind::Hyperbolic: {
                out[0] = v[0] * rate;
                double sq = std::sqrt(rate);
                for (int j = 1; j < k; ++j)
                    out[j] = std::polar(1.0, -angles[j - 1]) * v[j] * sq;
                return out;
            }
            case ModelKind::ParabolicAbelian: {
                out[0] = v[0] - double(sign);
                for (int j = 1; j < k; ++j) out[j] = std::polar(1.0, -angles[j - 1]) * v[j];
                return out;
            }
            case ModelKind::ParabolicHeisenberg: {
                out[1] = v[1] + kImagUnit;
                out[0] = v[0] + 2.0 * out[1] - kImagUnit;
                for (int j = 2; j < k; ++j) out[j] = std::polar(1.0, -angles[j - 1]) * v[j];
                return out;
            }
        }
        return out;
    }
};

} // namespace holomodel
