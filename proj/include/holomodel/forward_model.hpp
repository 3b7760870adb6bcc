#pragma once

#include <array>
#include <deque>
#include <functional>

#include "holomodel/chart.hpp"
#include "holomodel/dynamics.hpp"
#include "holomodel/limit_engine.hpp"
#include "holomodel/moebius_fit.hpp"

namespace holomodel {

struct ModelOptions {
    DynamicsOptions dyn;
    double limit_tol = 1e-9;
    int horizon_max = 400;
    int consecutive_hits = 3;
    int oscillation_window = 32;
    double svd_tol = 1e-4;
    double commute_tol = 1e-6;
    double valiron_tol = 1e-5;
    double cover_tol = 0.5;
    int grid_size = 24;
    double grid_radius = 0.75;
    double fit_radius = 0.15;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Renormalized non-autonomous system: frames h_n recenter the orbit of x0 at
// the origin, with the gauge aligned along the orbit direction.

struct RenormalizedSystem {
    MapExpr f;
    CVec x0;
    std::vector<CVec> orbit;             // f^n(x0)
    std::vector<BallAutomorphism> autos; // autos[n](orbit[n]) = 0
    bool orbit_truncated = false;
    double orbit_guard = 1e-13;
    std::shared_ptr<LimitEngine> engine_cache;

    int horizon() const { return static_cast<int>(autos.size()) - 1; }

    // Limit evaluations run through a chart engine adapted to the orbit (see
    // limit_engine.hpp); the ball-coordinate frames above remain the public
    // renormalization data.
    LimitEngine& engine() {
        if (!engine_cache) {
            extend(std::max(24, static_cast<int>(orbit.size())));
            const MapExpr fc = f;
            auto polish = [fc](const CVec& guess) {
                return detail::polish_fixed_point(fc, guess, 0.05);
            };
            engine_cache = make_limit_engine(f, x0, orbit, polish);
        }
        return *engine_cache;
    }

    void extend(int target) {
        while (static_cast<int>(orbit.size()) <= target && !orbit_truncated) {
            CVec next = f.eval(orbit.back(), false);
            double gap = f.domain().boundary_gap(next);
            if (gap < -1e-12) throw OrbitEscapedDomain("renormalized orbit escaped the domain");
            if (gap < orbit_guard) {
                orbit_truncated = true;
                break;
            }
            orbit.push_back(next);
        }
        while (static_cast<int>(autos.size()) < static_cast<int>(orbit.size())) {
            int n = static_cast<int>(autos.size());
            CVec toward = n + 1 < static_cast<int>(orbit.size()) ? orbit[n + 1]
                                                                 : f.eval(orbit[n], false);
            autos.push_back(frame_to_origin(f.domain(), orbit[n], toward));
        }
    }

    // f~_{n,m} = h_m o f^{m-n} o h_n^{-1}
    CVec renorm(int n, int m, const CVec& x) const {
        CVec z = autos[n].apply_inverse(x);
        for (int i = n; i < m; ++i) z = f.eval(z, false);
        return autos[m].apply(z);
    }
};

inline RenormalizedSystem build_renormalized_system(const MapExpr& f, const CVec& x0, int N) {
    f.domain().require_inside(x0);
    RenormalizedSystem sys{f, x0, {x0}, {}, false, 1e-13};
    sys.extend(N);
    return sys;
}

// ---------------------------------------------------------------------------
// Direct limit alpha_n = lim_m h_m o f^{m-n} on a probe grid.

struct ConvergenceReport {
    int horizon_used = 0;
    double sup_residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool oscillation_detected = false;
};

struct DirectLimit {
    int n = 0;
    int M = 0; // frozen evaluation horizon
    ConvergenceReport report;
    HoloEval alpha;
};

inline DirectLimit direct_limit_map(RenormalizedSystem& sys, int n, const std::vector<CVec>& grid,
                                    double tol, const ModelOptions& opts = {}) {
    DirectLimit lim;
    lim.n = n;
    sys.engine();
    auto engine = sys.engine_cache;
    engine->extend(n + 1);
    if (engine->frames() <= n)
        throw ModelNotConverged("reference orbit too short for alpha_" + std::to_string(n));

    std::vector<CVec> state;
    state.reserve(grid.size());
    for (const CVec& y : grid) state.push_back(engine->to_chart(y));
    std::vector<CVec> prev_img(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) prev_img[g] = engine->recenter(n, state[g]);

    std::deque<double> window;
    double prev_window_min = std::numeric_limits<double>::infinity();
    int hits = 0;
    for (int m = n + 1; m <= opts.horizon_max; ++m) {
        engine->extend(m);
        if (engine->frames() <= m) break; // orbit hit a numerical guard
        double delta = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            state[g] = engine->F.eval(state[g], false);
            CVec img = engine->recenter(m, state[g]);
            delta = std::max(delta, (img - prev_img[g]).norm());
            prev_img[g] = img;
        }
        lim.report.horizon_used = m;
        lim.report.sup_residual = delta;
        if (delta < tol) {
            if (++hits >= opts.consecutive_hits) {
                lim.report.converged = true;
                lim.M = m;
                break;
            }
        } else {
            hits = 0;
        }
        window.push_back(delta);
        if (static_cast<int>(window.size()) > opts.oscillation_window) {
            window.pop_front();
            double wmin = *std::min_element(window.begin(), window.end());
            if (m % opts.oscillation_window == 0) {
                if (wmin >= prev_window_min && wmin > tol) {
                    lim.report.oscillation_detected = true;
                    break;
                }
                prev_window_min = wmin;
            }
        }
    }
    if (!lim.report.converged) lim.M = lim.report.horizon_used;

    auto eng = sys.engine_cache;
    const int M = lim.M;
    const int steps = M - n;
    lim.alpha = HoloEval{sys.f.domain(), sys.f.dim(), [eng, M, steps](const CVec& y) {
                             CVec z = eng->to_chart(y);
                             for (int i = 0; i < steps; ++i) z = eng->F.eval(z, false);
                             return eng->from_chart(eng->recenter(M, z));
                         }};
    return lim;
}

// ---------------------------------------------------------------------------
// Retract rank from the singular values of the numerical Jacobian.

struct RankEstimate {
    int k = 0;
    std::vector<int> votes;
    std::vector<double> sigmas; // singular values at the first probe
};

inline RankEstimate retract_rank(const HoloEval& alpha, const std::vector<CVec>& probes,
                                 double svd_tol = 1e-4) {
    RankEstimate est;
    for (const CVec& p : probes) {
        CMat J = numeric_jacobian(alpha.fn, p, 1e-4);
        Eigen::JacobiSVD<CMat> svd(J);
        auto s = svd.singularValues();
        int k = 0;
        if (s(0) >= 1e-8) {
            for (Eigen::Index i = 0; i < s.size(); ++i)
                if (s(i) > svd_tol * s(0)) ++k;
        }
        est.votes.push_back(k);
        if (est.sigmas.empty())
            for (Eigen::Index i = 0; i < s.size(); ++i) est.sigmas.push_back(s(i));
    }
    // majority vote
    for (int cand : est.votes) {
        int c = static_cast<int>(std::count(est.votes.begin(), est.votes.end(), cand));
        if (2 * c > static_cast<int>(est.votes.size())) {
            est.k = cand;
            return est;
        }
    }
    throw RankUnstable("retract rank probes disagree with no majority");
}

// ---------------------------------------------------------------------------
// Chart of the retract: an isometric parametrization of Z by B^k.

struct RetractChart {
    bool valid = false;
    int k = 0;
    double slice_residual = 0.0;
    std::function<CVec(const CVec&)> to; // Z -> B^k coordinates
};

namespace detail {

// d(phi_a) at a applied to u: -(P_a u + s Q_a u) / (1 - |a|^2)
inline CVec ball_involution_differential_at_center(const CVec& a, const CVec& u) {
    double na2 = a.squaredNorm();
    if (na2 < 1e-30) return u;
    double s = std::sqrt(std::max(0.0, 1.0 - na2));
    CVec Pu = (herm(u, a) / na2) * a;
    return -(Pu + s * (u - Pu)) / (1.0 - na2);
}

} // namespace detail

inline RetractChart build_retract_chart(const HoloEval& alpha, int k,
                                        const std::vector<CVec>& grid) {
    RetractChart chart;
    chart.k = k;
    const DomainSpec X = alpha.domain;
    const int q = X.dim;
    if (k == 0) return chart;

    if (X.kind == DomainKind::Ball) {
        if (k == q) {
            chart.valid = true;
            chart.to = [](const CVec& z) { return z; };
            return chart;
        }
        // Retracts of the ball are affine slices; fit the affine hull of the
        // image, send its least-norm point to 0 and align with the first k
        // coordinates.  The result is an isometric chart onto B^k.
        std::vector<CVec> img;
        for (const CVec& x : grid) img.push_back(alpha(x));
        CVec mu = CVec::Zero(q);
        for (const CVec& s : img) mu += s;
        mu /= double(img.size());
        CMat S(q, img.size());
        for (std::size_t i = 0; i < img.size(); ++i) S.col(i) = img[i] - mu;
        Eigen::JacobiSVD<CMat> svd(S, Eigen::ComputeFullU);
        CMat V = svd.matrixU().leftCols(k);
        CVec astar = mu - V * (V.adjoint() * mu);
        if (!X.contains(astar, -1e-9)) return chart; // degenerate fit
        BallAutomorphism mob = mobius_to_origin(X, astar);
        CMat W(q, k);
        for (int j = 0; j < k; ++j)
            W.col(j) = detail::ball_involution_differential_at_center(astar, V.col(j));
        // orthonormalize W and complete to a unitary change of frame
        Eigen::HouseholderQR<CMat> qr(W);
        CMat Q = qr.householderQ();
        CMat U = Q.adjoint();
        double resid = 0.0;
        for (const CVec& s : img) {
            CVec c = U * mob.apply(s);
            resid = std::max(resid, c.tail(q - k).norm());
        }
        chart.slice_residual = resid;
        chart.valid = resid < 1e-5;
        chart.to = [U, mob, k](const CVec& z) { return CVec((U * mob.apply(z)).head(k)); };
        return chart;
    }

    if (X.kind == DomainKind::Polydisc && k == 1) {
        // rank-1 polydisc retracts are graphs over their dominant coordinate
        CVec probe = grid.empty() ? CVec::Zero(q) : grid.front();
        CMat J = numeric_jacobian(alpha.fn, probe, 1e-4);
        int i0 = 0;
        double best = -1.0;
        for (int i = 0; i < q; ++i) {
            double r = J.row(i).norm();
            if (r > best) {
                best = r;
                i0 = i;
            }
        }
        chart.valid = true;
        chart.to = [i0](const CVec& z) { return cvec1(z[i0]); };
        return chart;
    }
    return chart; // polydisc with k >= 2: no normal form route
}

// ---------------------------------------------------------------------------
// The canonical semi-model.

struct SemiModel {
    int retract_dim = 0;
    ModelKind kind = ModelKind::PointModel;
    NormalForm phi;
    bool normal_form_available = false;
    double lambda_model = 1.0; // rate of phi (hyperbolic)
    int sign = 0;              // parabolic translation direction
    std::vector<double> angles;
    HoloEval intertwiner; // X -> H^k
    CVec base_point;
    int horizon = 0;
    ConvergenceReport limit_report;
    RankEstimate rank_detail;
    double commutation_residual = 0.0;
    double slice_residual = 0.0;
    double fit_residual = 0.0;
    ClassificationReport classification;
    CVec point_model_value; // elliptic degenerate case
    std::vector<std::string> warnings;
};

namespace detail {

// Full-rank ball case (k = q): in the Denjoy-Wolff chart, tau is an exact
// affine automorphism of H^q fixing infinity, so the lomo-form conjugacy is
// closed-form affine algebra: a Heisenberg translation kills the second
// fixed point, the unitary w-block diagonalizes into the angles.
inline void full_rank_ball_normal_form(const MapExpr& f, RenormalizedSystem& sys,
                                       const DirectLimit& lim, SemiModel& model,
                                       const ModelOptions& opts);

} // namespace detail

// tau on the retract, evaluated through the limit of consecutive frame
// transitions: tau = lim_m (frame_{m-1} o frame_m^{-1}).  This stays correct
// when f is not univalent (alpha_0 is then a covering onto its image and
// inverting it pointwise would pick arbitrary sheets).
inline HoloEval tau_from_frames(RenormalizedSystem& sys, int M) {
    sys.engine();
    auto eng = sys.engine_cache;
    if (eng->frames() <= M) eng->extend(M);
    const int M1 = std::min(M, eng->frames() - 1);
    return HoloEval{sys.f.domain(), sys.f.dim(), [eng, M1](const CVec& z) {
                        return eng->from_chart(
                            eng->recenter(M1 - 1, eng->unrecenter(M1, eng->to_chart(z))));
                    }};
}

inline SemiModel canonical_semi_model(const MapExpr& f, const CVec& x0,
                                      const ModelOptions& opts = {}) {
    SemiModel model;
    model.base_point = x0;
    model.classification = classify_map(f, opts.dyn);

    if (model.classification.kind == MapClass::Elliptic) {
        model.kind = ModelKind::PointModel;
        model.retract_dim = 0;
        model.point_model_value = *model.classification.interior_fixed;
        model.warnings.push_back("elliptic input: degenerate point model");
        CVec fixed = model.point_model_value;
        model.intertwiner = HoloEval{f.domain(), 0, [fixed](const CVec&) { return CVec(0); }};
        return model;
    }

    RenormalizedSystem sys = build_renormalized_system(f, x0, 32);
    std::vector<CVec> grid = interior_samples(f.domain(), opts.grid_size, opts.seed, 0.7);
    DirectLimit lim = direct_limit_map(sys, 0, grid, opts.limit_tol, opts);
    model.limit_report = lim.report;
    model.horizon = lim.M;
    if (!lim.report.converged)
        throw ModelNotConverged(lim.report.oscillation_detected
                                    ? "renormalized compositions oscillate (no full-sequence limit)"
                                    : "renormalized compositions did not plateau within the horizon");

    std::vector<CVec> probes = interior_samples(f.domain(), 3, opts.seed ^ 0x9d2c, 0.5);
    model.rank_detail = retract_rank(lim.alpha, probes, opts.svd_tol);
    const int k = model.rank_detail.k;
    model.retract_dim = k;
    if (k == 0) {
        model.kind = ModelKind::PointModel;
        model.warnings.push_back("limit map is constant; point model");
        model.intertwiner = HoloEval{f.domain(), 0, [](const CVec&) { return CVec(0); }};
        return model;
    }

    RetractChart chart = build_retract_chart(lim.alpha, k, grid);
    model.slice_residual = chart.slice_residual;
    model.kind = model.classification.kind == MapClass::Hyperbolic ? ModelKind::Hyperbolic
                                                                   : ModelKind::ParabolicAbelian;
    if (k == f.dim() && k > 1 && f.domain().kind == DomainKind::Ball && sys.engine().charted) {
        detail::full_rank_ball_normal_form(f, sys, lim, model, opts);
        return model;
    }
    if (!chart.valid || k > 1) {
        // rank-1 retracts and full-rank ball maps carry normal forms; the
        // remaining cases (intermediate ball ranks, polydisc rank >= 2) are
        // reported without one
        model.normal_form_available = false;
        model.warnings.push_back(k > 1 ? "normal form not constructed for this retract rank"
                                       : "retract chart fit failed; normal form unavailable");
        HoloEval alpha = lim.alpha;
        model.intertwiner = alpha; // raw limit map, no conjugation
        return model;
    }

    // tau on the retract from the frame-transition limit, sampled on image
    // points of alpha_0 and fitted as a Moebius map of the disc chart.
    HoloEval tau = tau_from_frames(sys, lim.M);
    Complex tstar = chart.to(lim.alpha(x0))[0];
    std::vector<std::pair<Complex, Complex>> samples;
    for (const CVec& x : grid) {
        CVec z = lim.alpha(x);
        samples.push_back({chart.to(z)[0], chart.to(tau(z))[0]});
    }
    MoebiusFit fit = fit_moebius(samples);
    model.fit_residual = fit.residual;
    if (fit.residual > 1e-5)
        model.warnings.push_back("tau is far from a Moebius map of the retract chart");

    const bool parabolic = model.classification.kind == MapClass::Parabolic;
    MoebiusDynamics dyn = analyze_moebius(fit.map, parabolic);
    ScalarMoebius gamma;
    if (parabolic) {
        if (dyn.parabolic_fixed.at_infinity)
            throw ModelNotConverged("parabolic fixed point of tau escaped the chart");
        ScalarMoebius g0 = disc_point_to_infinity(dyn.parabolic_fixed.value);
        Eigen::Matrix2cd Phi = (g0.after(ScalarMoebius{fit.map.M}).after(g0.inverse())).M;
        Complex sigma = Phi(0, 1) / Phi(1, 1);
        double drift = std::abs(Phi(1, 0)) / Phi.norm();
        if (drift > 1e-6)
            model.warnings.push_back("conjugated parabolic map is not affine to fit precision");
        if (std::abs(sigma) < 1e-8) {
            model.normal_form_available = false;
            model.warnings.push_back("zero-step parabolic: translation length vanished");
            model.intertwiner = lim.alpha;
            return model;
        }
        model.sign = sigma.real() >= 0 ? +1 : -1;
        gamma = halfplane_scale(1.0 / std::abs(sigma.real())).after(g0);
        model.lambda_model = 1.0;
        model.phi = NormalForm{ModelKind::ParabolicAbelian, 1, 1.0, model.sign, {}};
        model.kind = ModelKind::ParabolicAbelian;
    } else {
        if (dyn.attracting.at_infinity || dyn.repelling.at_infinity)
            throw ModelNotConverged("fixed points of tau escaped the chart");
        if (std::abs(std::abs(dyn.attracting.value) - 1.0) > 1e-4 ||
            std::abs(std::abs(dyn.repelling.value) - 1.0) > 1e-4)
            model.warnings.push_back("fixed points of tau are not on the chart boundary");
        ScalarMoebius g0 = disc_pair_to_halfplane(dyn.attracting.value, dyn.repelling.value);
        Complex vstar = g0.apply(tstar);
        gamma = halfplane_scale(1.0 / std::abs(vstar)).after(g0);
        model.lambda_model = dyn.multiplier_attracting;
        model.phi = NormalForm{ModelKind::Hyperbolic, 1, model.lambda_model, +1, {}};
        model.kind = ModelKind::Hyperbolic;
        if (model.classification.dilation &&
            std::abs(model.lambda_model - *model.classification.dilation) > opts.dyn.dilation_tol)
            model.warnings.push_back("normal-form rate differs from the boundary dilation estimate");
    }
    model.normal_form_available = true;

    HoloEval alpha = lim.alpha;
    auto chart_to = chart.to;
    ScalarMoebius gam = gamma;
    model.intertwiner = HoloEval{f.domain(), 1, [alpha, chart_to, gam](const CVec& x) {
                                     return cvec1(gam.apply(chart_to(alpha(x))[0]));
                                 }};

    // commutation residual d_{H^k}(h(f(x)), phi(h(x))) over the grid
    double resid = 0.0;
    for (const CVec& x : grid) {
        CVec a = model.intertwiner(f.eval(x, false));
        CVec b = model.phi.apply(model.intertwiner(x));
        resid = std::max(resid, siegel_distance(a, b));
    }
    model.commutation_residual = resid;
    if (resid > opts.commute_tol)
        model.warnings.push_back("commutation residual above commute_tol");
    return model;
}

namespace detail {

inline void full_rank_ball_normal_form(const MapExpr& f, RenormalizedSystem& sys,
                                       const DirectLimit& lim, SemiModel& model,
                                       const ModelOptions& opts) {
    const int q = f.dim();
    auto eng = sys.engine_cache;
    const int M = std::min(lim.M, eng->frames() - 1);
    auto tau_chart = [eng, M](const CVec& xi) {
        return eng->recenter(M - 1, eng->unrecenter(M, xi));
    };
    CVec base = CVec::Zero(q);
    base[0] = kImagUnit;

    auto affine_parts = [&](const std::function<CVec(const CVec&)>& g, CMat& J, CVec& c) {
        const double h = 0.25;
        J.resize(q, q);
        for (int j = 0; j < q; ++j) {
            CVec p = base, m = base;
            p[j] += h;
            m[j] -= h;
            J.col(j) = (g(p) - g(m)) / (2.0 * h);
        }
        c = g(base) - J * base;
    };
    CMat J;
    CVec c;
    affine_parts(tau_chart, J, c);
    CVec probe = base;
    probe[0] += Complex(0.4, 0.7);
    probe[1] += 0.3;
    model.fit_residual = (tau_chart(probe) - (J * probe + c)).norm();
    if (model.fit_residual > 1e-7)
        model.warnings.push_back("tau is not affine in the chart to fit precision");

    const double rho = J(0, 0).real();
    const bool parabolic = model.classification.kind == MapClass::Parabolic;
    std::function<CVec(const CVec&)> gamma = [](const CVec& v) { return v; };
    double scale = 1.0;

    if (!parabolic) {
        model.lambda_model = 1.0 / rho;
        if (rho <= 1.0) model.warnings.push_back("chart expansion coefficient is not > 1");
        if (model.classification.dilation &&
            std::abs(model.lambda_model - *model.classification.dilation) > opts.dyn.dilation_tol)
            model.warnings.push_back("normal-form rate differs from the boundary dilation estimate");
        // second (repelling-side) fixed point -> 0 by an inverse Heisenberg
        // translation, which fixes infinity
        CVec P0 = (J - CMat::Identity(q, q)).fullPivLu().solve(CVec(-c));
        if (std::abs(siegel_pairing(P0, P0).real()) > 1e-6)
            model.warnings.push_back("second fixed point of tau is not on the boundary");
        const double t0 = P0[0].real();
        const CVec b0 = P0.tail(q - 1);
        gamma = [t0, b0, q](const CVec& v) {
            CVec w = v.tail(q - 1) - b0;
            Complex wb = herm(w, b0);
            CVec out(q);
            out[0] = v[0] - t0 - 2.0 * kImagUnit * wb - kImagUnit * b0.squaredNorm();
            out.tail(q - 1) = w;
            return out;
        };
        model.kind = ModelKind::Hyperbolic;
        model.phi = NormalForm{ModelKind::Hyperbolic, q, model.lambda_model, +1, {}};
    } else {
        model.lambda_model = 1.0;
        if (std::abs(rho - 1.0) > 1e-6)
            model.warnings.push_back("parabolic tau with nonunit chart expansion");
        double wtrans = c.tail(q - 1).norm();
        double wcouple = J.row(0).tail(q - 1).norm();
        if (wtrans > 1e-6 || wcouple > 1e-6) {
            // Heisenberg-coupled parabolic: reported, not normalized
            model.kind = ModelKind::ParabolicHeisenberg;
            model.normal_form_available = false;
            model.warnings.push_back("Heisenberg-type parabolic: normal form not normalized");
            model.intertwiner = lim.alpha;
            return;
        }
        double sigma = c[0].real();
        if (std::abs(sigma) < 1e-8) {
            model.normal_form_available = false;
            model.warnings.push_back("zero-step parabolic: translation length vanished");
            model.intertwiner = lim.alpha;
            return;
        }
        model.sign = sigma >= 0 ? +1 : -1;
        scale = 1.0 / std::abs(sigma);
        model.kind = ModelKind::ParabolicAbelian;
        model.phi = NormalForm{ModelKind::ParabolicAbelian, q, 1.0, model.sign, {}};
    }

    // w-block eigenstructure: Heisenberg translations leave it unchanged
    // (the chart maps are upper triangular: w never depends on z)
    CMat W2 = J.block(1, 1, q - 1, q - 1);
    Eigen::ComplexEigenSolver<CMat> es(W2);
    CMat V = es.eigenvectors();
    Eigen::HouseholderQR<CMat> qr(V);
    CMat Vq = qr.householderQ();
    model.angles.clear();
    const double expected_mag = parabolic ? 1.0 : std::sqrt(rho);
    for (int j = 0; j < q - 1; ++j) {
        Complex ev = es.eigenvalues()(j);
        model.angles.push_back(std::arg(ev));
        if (std::abs(std::abs(ev) - expected_mag) > 1e-6 * expected_mag)
            model.warnings.push_back("w-block eigenvalue magnitude off the normal form");
    }
    model.phi.angles = model.angles;
    model.normal_form_available = true;

    const CMat Vadj = Vq.adjoint();
    const double s = scale;
    auto gamma_chain = [gamma, Vadj, s, q](const CVec& v) {
        CVec u = gamma(v);
        u.tail(q - 1) = CVec(Vadj * u.tail(q - 1));
        u[0] *= s;
        u.tail(q - 1) *= std::sqrt(s);
        return u;
    };
    model.intertwiner =
        HoloEval{f.domain(), q, [eng, M, gamma_chain](const CVec& x) {
                     CVec z = eng->to_chart(x);
                     for (int i = 0; i < M; ++i) z = eng->F.eval(z, false);
                     return gamma_chain(eng->recenter(M, z));
                 }};

    double resid = 0.0;
    for (const CVec& x : interior_samples(f.domain(), opts.grid_size, opts.seed, 0.7)) {
        CVec a = model.intertwiner(f.eval(x, false));
        CVec b = model.phi.apply(model.intertwiner(x));
        resid = std::max(resid, siegel_distance(a, b));
    }
    model.commutation_residual = resid;
    if (resid > opts.commute_tol)
        model.warnings.push_back("commutation residual above commute_tol");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Valiron map: first coordinate of the intertwiner of a hyperbolic model.

struct ValironReport {
    HoloEval theta; // X -> H
    double residual = 0.0;
    double min_im = 0.0;
    double lambda = 0.0;
};

inline ValironReport valiron_map(const MapExpr& f, const SemiModel& model,
                                 const ModelOptions& opts = {}) {
    if (model.kind != ModelKind::Hyperbolic || !model.normal_form_available)
        throw WrongKind("Valiron map requires a hyperbolic model with a normal form");
    ValironReport rep;
    rep.lambda = model.lambda_model;
    HoloEval h = model.intertwiner;
    rep.theta = HoloEval{h.domain, 1, [h](const CVec& x) { return cvec1(h(x)[0]); }};
    rep.min_im = std::numeric_limits<double>::infinity();
    for (const CVec& x : interior_samples(f.domain(), opts.grid_size, opts.seed ^ 0x7a1, 0.8)) {
        Complex tx = rep.theta(x)[0];
        Complex tfx = rep.theta(f.eval(x, false))[0];
        rep.residual = std::max(rep.residual, std::abs(tfx - tx / model.lambda_model) / std::abs(tx));
        rep.min_im = std::min(rep.min_im, tx.imag());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Semi-model verification: commutation, exhaustion surrogate, pullback.

struct SemiModelVerification {
    bool degenerate = false;
    double commutation = 0.0;
    std::vector<std::pair<int, double>> pullback; // (m, sup residual over pairs)
    bool pullback_monotone = true;
    int exhaustion_covered = 0;
    int exhaustion_targets = 0;
    double exhaustion_worst = 0.0;
};

inline SemiModelVerification verify_semi_model(const MapExpr& f, const SemiModel& model,
                                               const std::vector<CVec>& grid,
                                               const ModelOptions& opts = {}) {
    SemiModelVerification ver;
    if (model.kind == ModelKind::PointModel || !model.normal_form_available) {
        ver.degenerate = true;
        return ver;
    }

    for (const CVec& x : grid) {
        CVec a = model.intertwiner(f.eval(x, false));
        CVec b = model.phi.apply(model.intertwiner(x));
        ver.commutation = std::max(ver.commutation, siegel_distance(a, b));
    }

    // exhaustion surrogate: phi^{-n} pulls sampled targets into h(X)
    std::vector<CVec> image;
    for (const CVec& x : grid) image.push_back(model.intertwiner(x));
    ver.exhaustion_targets = 8;
    for (int j = 0; j < ver.exhaustion_targets; ++j) {
        CVec w = image[j % image.size()];
        w[0] += Complex(0.4 * j, 0.3 * j); // push up and sideways inside H^k
        double best = std::numeric_limits<double>::infinity();
        for (int n = 0; n <= 64; ++n) {
            for (const CVec& im : image) best = std::min(best, siegel_distance(w, im));
            if (best < opts.cover_tol) break;
            w = model.phi.apply_inverse(w);
        }
        if (best < opts.cover_tol) ++ver.exhaustion_covered;
        ver.exhaustion_worst = std::max(ver.exhaustion_worst, best);
    }

    // pullback: |k_X(f^m x, f^m y) - d_{H^k}(h(x), h(y))|, computed in the
    // Siegel chart at the Denjoy-Wolff point for ball domains (exact at
    // depths where ball coordinates would have collapsed onto the boundary)
    const std::vector<int> checkpoints = {1, 2, 5, 10, 20, 50};
    std::vector<std::pair<CVec, CVec>> pairs;
    for (std::size_t i = 0; i + 1 < grid.size(); i += 2) pairs.push_back({grid[i], grid[i + 1]});
    std::vector<double> model_dist;
    for (auto& [x, y] : pairs)
        model_dist.push_back(siegel_distance(model.intertwiner(x), model.intertwiner(y)));

    if (f.domain().kind == DomainKind::Ball && model.classification.dw) {
        SiegelChart chart(f.domain(), *model.classification.dw);
        MapExpr F = chart.conjugate(f);
        std::vector<std::pair<CVec, CVec>> lifted;
        for (auto& [x, y] : pairs) lifted.push_back({chart.to_chart(x), chart.to_chart(y)});
        int m = 0;
        for (int cp : checkpoints) {
            double sup = 0.0;
            for (std::size_t i = 0; i < lifted.size(); ++i) {
                while (m < cp) {
                    for (auto& [X, Y] : lifted) {
                        X = F.eval(X, false);
                        Y = F.eval(Y, false);
                    }
                    ++m;
                }
                sup = std::max(sup, std::abs(siegel_distance(lifted[i].first, lifted[i].second) -
                                             model_dist[i]));
            }
            ver.pullback.push_back({cp, sup});
        }
    } else {
        // bounded realization fallback, capped at the numerical boundary guard
        std::vector<std::pair<CVec, CVec>> state = pairs;
        int m = 0;
        for (int cp : checkpoints) {
            bool ok = true;
            while (m < cp && ok) {
                for (auto& [X, Y] : state) {
                    X = f.eval(X, false);
                    Y = f.eval(Y, false);
                    if (f.domain().boundary_gap(X) < 1e-11 || f.domain().boundary_gap(Y) < 1e-11)
                        ok = false;
                }
                ++m;
            }
            if (!ok) break;
            double sup = 0.0;
            for (std::size_t i = 0; i < state.size(); ++i)
                sup = std::max(sup, std::abs(kobayashi_distance(f.domain(), state[i].first,
                                                                state[i].second) -
                                             model_dist[i]));
            ver.pullback.push_back({cp, sup});
        }
    }
    for (std::size_t i = 0; i + 1 < ver.pullback.size(); ++i)
        if (ver.pullback[i + 1].second > ver.pullback[i].second + 1e-12)
            ver.pullback_monotone = false;
    return ver;
}

} // namespace holomodel
