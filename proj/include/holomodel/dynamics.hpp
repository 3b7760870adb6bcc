#pragma once

#include <optional>
#include <string>
#include <vector>

#include "holomodel/geometry.hpp"
#include "holomodel/map_expr.hpp"
#include "holomodel/newton.hpp"

namespace holomodel {

// Rate-type quantities (divergence rate, backward rate) are measured in the
// curvature -1 normalization of the hyperbolic metric, i.e. with doubled
// lengths relative to the atanh-normalized kobayashi_distance.  This is the
// normalization in which c(f) = -log(lambda) at the Denjoy-Wolff point and
// mu = exp(lim sigma_m/m) equals the dilation at a repelling point.
inline constexpr double kRateLengthScale = 2.0;

struct DynamicsOptions {
    double fixed_tol = 1e-10;
    double settle_tol = 1e-13;     // orbit displacement that counts as settled
    double boundary_cut = 1e-9;    // boundary gap that counts as converged to the boundary
    long dw_max_iter = 2000000;
    int dilation_depth = 40;
    double dilation_floor = 1e-8;  // discard radial samples closer to the boundary
    int rate_m_max = 2048;
    double boundary_guard = 1e-13; // orbits are truncated at this gap
    double step_tol = 1e-9;
    long step_n_max = 200;
    double step_positive_tol = 1e-6;
    double dilation_tol = 1e-4;
    double rate_tol = 1e-3;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Denjoy-Wolff point.

struct DenjoyWolffResult {
    bool interior = false;
    CVec fixed_point;  // valid when interior
    BoundaryPoint dw;  // valid when !interior
    long iterations = 0;
    double residual = 0.0;
    bool newton_polished = false;
};

namespace detail {

inline std::optional<CVec> polish_fixed_point(const MapExpr& f, const CVec& guess,
                                              double capture_radius) {
    auto F = [&](const CVec& z) { return CVec(f.eval(z, false) - z); };
    auto J = [&](const CVec& z) {
        return CMat(f.jacobian(z) - CMat::Identity(f.dim(), f.dim()));
    };
    NewtonOptions opts;
    opts.max_iters = 200;
    opts.tol = 1e-13;
    try {
        auto root = newton_root(F, J, guess, opts);
        if (root && (*root - guess).norm() <= capture_radius) return root;
    } catch (const PoleHit&) {
        // cleared rational forms may have a removable singularity exactly at
        // the boundary fixed point; the iterate estimate is kept instead
    }
    return std::nullopt;
}

inline BoundaryPoint normalize_boundary(const DomainSpec& X, CVec z) {
    if (X.kind == DomainKind::Ball) {
        return BoundaryPoint::of(z / z.norm());
    }
    // polydisc: push near-unit coordinates onto the circle, keep the rest
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (std::abs(z[i]) > 1.0 - 1e-6) z[i] /= std::abs(z[i]);
    return BoundaryPoint::of(z);
}

} // namespace detail

inline DenjoyWolffResult denjoy_wolff(const MapExpr& f, const DynamicsOptions& opts = {}) {
    const DomainSpec X = f.domain();
    DenjoyWolffResult res;
    CVec z = CVec::Zero(X.dim);
    for (long n = 0; n < opts.dw_max_iter; ++n) {
        CVec w = f.eval(z, false);
        double gap = X.boundary_gap(w);
        if (gap < -1e-12) throw OrbitEscapedDomain("orbit escaped while locating the Denjoy-Wolff point");
        if (gap < opts.boundary_cut) {
            res.interior = false;
            res.iterations = n + 1;
            // Rational boundary fixed points polish to machine precision.
            if (auto root = detail::polish_fixed_point(f, w, 0.05)) {
                res.dw = detail::normalize_boundary(X, *root);
                res.newton_polished = true;
            } else {
                res.dw = detail::normalize_boundary(X, w);
            }
            res.residual = gap;
            return res;
        }
        if ((w - z).norm() < opts.settle_tol) {
            CVec fixed = w;
            if (auto root = detail::polish_fixed_point(f, w, 0.1)) fixed = *root;
            res.interior = true;
            res.fixed_point = fixed;
            res.iterations = n + 1;
            res.residual = (f.eval(fixed, false) - fixed).norm();
            res.newton_polished = true;
            if (res.residual > opts.fixed_tol)
                throw NoConvergence("orbit settled but the fixed-point residual stayed at " +
                                    std::to_string(res.residual));
            return res;
        }
        z = w;
    }
    // Rotation-type elliptic maps: locate the fixed point by Newton from grid starts.
    for (const CVec& start : interior_samples(X, 32, opts.seed ^ 0xa5a5)) {
        if (auto root = detail::polish_fixed_point(f, start, 10.0)) {
            if (X.contains(*root, -1e-9)) {
                res.interior = true;
                res.fixed_point = *root;
                res.iterations = opts.dw_max_iter;
                res.residual = (f.eval(*root, false) - *root).norm();
                res.newton_polished = true;
                return res;
            }
        }
    }
    throw NoConvergence("no Denjoy-Wolff convergence within the iteration budget");
}

// ---------------------------------------------------------------------------
// Boundary dilation along the radial approach.

struct DilationEstimate {
    double lambda = 0.0;         // radial estimate (deepest valid sample)
    double min_ratio = 0.0;
    std::vector<double> ratios;  // one per radial sample j = 4..depth
    int deepest_j = 0;
    bool diverged = false;       // +inf sentinel
};

inline DilationEstimate boundary_dilation(const MapExpr& f, const BoundaryPoint& zeta,
                                          int depth = 40, const DynamicsOptions& opts = {}) {
    const DomainSpec X = f.domain();
    if (zeta.infinity) throw DomainMismatch("dilation needs a finite boundary point");
    DilationEstimate est;
    est.min_ratio = std::numeric_limits<double>::infinity();
    double last_dist_to_zeta = std::numeric_limits<double>::infinity();
    for (int j = 4; j <= depth; ++j) {
        double t = std::pow(2.0, -j);
        CVec z = (1.0 - t) * zeta.direction;
        double gap_in = X.boundary_gap(z);
        if (gap_in < opts.dilation_floor) break;
        CVec w = f.eval(z, false);
        double gap_out = X.boundary_gap(w);
        double ratio = gap_out / gap_in;
        est.ratios.push_back(ratio);
        est.lambda = ratio;
        est.min_ratio = std::min(est.min_ratio, ratio);
        est.deepest_j = j;
        last_dist_to_zeta = (w - zeta.direction).norm();
    }
    if (est.ratios.empty()) throw NotAFixedDirection("no valid radial samples toward zeta");
    if (last_dist_to_zeta > 1e-3)
        throw NotAFixedDirection("f does not fix the boundary direction (residual " +
                                 std::to_string(last_dist_to_zeta) + ")");
    if (est.lambda > 1e6) {
        est.diverged = true;
        est.lambda = std::numeric_limits<double>::infinity();
    }
    return est;
}

// ---------------------------------------------------------------------------
// Forward steps and the divergence rate.

struct StepEstimate {
    double value = 0.0;
    long n_star = 0;
    bool converged = false;
    std::vector<double> sequence; // d_n over n (reported for inspection)
};

inline StepEstimate forward_step(const MapExpr& f, const CVec& x, int m, long n_max,
                                 const DynamicsOptions& opts = {}) {
    f.domain().require_inside(x);
    StepEstimate est;
    if (m == 0) {
        est.converged = true;
        return est;
    }
    IterateOptions io;
    io.stop_gap = opts.boundary_guard;
    Orbit orb = iterate(f, n_max + m, x, io);
    const long N = orb.length() - m;
    if (N < 1) return est;
    double prev = std::numeric_limits<double>::infinity();
    for (long n = 0; n < N; ++n) {
        double d = kobayashi_distance(f.domain(), orb.points[n], orb.points[n + m]);
        est.sequence.push_back(d);
        est.value = d;
        est.n_star = n;
        // smallest n whose successive decrease falls below step_tol
        if (prev - d < opts.step_tol) {
            est.converged = true;
            break;
        }
        prev = d;
    }
    return est;
}

struct RateEstimate {
    double c = 0.0;        // refined estimate (difference-quotient form)
    double c_inf_form = 0.0; // min_m (scaled k(f^m x, x) / m), upper bound
    std::vector<double> tail; // last three scaled k_m/m values
    long m_used = 0;
};

inline RateEstimate divergence_rate(const MapExpr& f, const CVec& x, int m_max = 2048,
                                    const DynamicsOptions& opts = {}) {
    f.domain().require_inside(x);
    IterateOptions io;
    io.stop_gap = opts.boundary_guard;
    Orbit orb = iterate(f, m_max, x, io);
    const long M = orb.length() - 1;
    RateEstimate est;
    est.m_used = M;
    if (M < 1) return est;
    std::vector<double> k(M + 1, 0.0);
    est.c_inf_form = std::numeric_limits<double>::infinity();
    for (long m = 1; m <= M; ++m) {
        k[m] = kobayashi_distance(f.domain(), orb.points[m], orb.points[0]);
        double v = kRateLengthScale * k[m] / double(m);
        est.c_inf_form = std::min(est.c_inf_form, v);
        est.tail.push_back(v);
        if (est.tail.size() > 3) est.tail.erase(est.tail.begin());
    }
    // Difference quotient kills the O(1/m) bias of the inf form; the inf form
    // stays as the rigorous upper bound.
    long half = M / 2;
    double c_ref = half >= 1 ? kRateLengthScale * (k[2 * half] - k[half]) / double(half)
                             : est.c_inf_form;
    est.c = std::clamp(c_ref, 0.0, est.c_inf_form);
    return est;
}

// ---------------------------------------------------------------------------
// Classification.

enum class MapClass { Elliptic, Parabolic, Hyperbolic };

inline std::string map_class_name(MapClass c) {
    switch (c) {
        case MapClass::Elliptic: return "elliptic";
        case MapClass::Parabolic: return "parabolic";
        case MapClass::Hyperbolic: return "hyperbolic";
    }
    return "?";
}

struct ClassificationReport {
    MapClass kind = MapClass::Elliptic;
    std::optional<CVec> interior_fixed;
    std::optional<BoundaryPoint> dw;
    std::optional<double> dilation;
    DilationEstimate dilation_detail;
    RateEstimate rate;
    double step_min = 0.0;
    bool nonzero_step = false;
    long dw_iterations = 0;
    std::vector<std::string> warnings;
};

inline ClassificationReport classify_map(const MapExpr& f, const DynamicsOptions& opts = {}) {
    ClassificationReport rep;
    DenjoyWolffResult dw = denjoy_wolff(f, opts);
    rep.dw_iterations = dw.iterations;

    CVec rate_base = CVec::Zero(f.dim());
    rep.rate = divergence_rate(f, rate_base, opts.rate_m_max, opts);

    if (dw.interior) {
        rep.kind = MapClass::Elliptic;
        rep.interior_fixed = dw.fixed_point;
        if ((f.eval(dw.fixed_point, false) - dw.fixed_point).norm() > opts.fixed_tol)
            rep.warnings.push_back("interior fixed point residual above fixed_tol");
    } else {
        rep.dw = dw.dw;
        rep.dilation_detail = boundary_dilation(f, dw.dw, opts.dilation_depth, opts);
        double lambda = rep.dilation_detail.lambda;
        rep.dilation = lambda;
        if (lambda > 1.0 + opts.dilation_tol)
            rep.warnings.push_back("radial dilation estimate exceeds 1 at the Denjoy-Wolff point");
        if (std::abs(lambda - 1.0) <= opts.dilation_tol) {
            rep.kind = MapClass::Parabolic;
            if (rep.rate.c > 10 * opts.rate_tol)
                rep.warnings.push_back("parabolic map with nonzero divergence-rate estimate");
        } else {
            rep.kind = MapClass::Hyperbolic;
            if (std::abs(rep.rate.c + std::log(lambda)) > opts.rate_tol)
                rep.warnings.push_back("divergence rate and -log(dilation) disagree beyond rate_tol");
        }
    }

    // nonzero-step test on a seeded base sweep
    rep.step_min = std::numeric_limits<double>::infinity();
    for (const CVec& x : interior_samples(f.domain(), 8, opts.seed ^ 0x51e5u, 0.6)) {
        StepEstimate s = forward_step(f, x, 1, opts.step_n_max, opts);
        rep.step_min = std::min(rep.step_min, s.value);
    }
    rep.nonzero_step = rep.step_min > opts.step_positive_tol;
    return rep;
}

} // namespace holomodel
