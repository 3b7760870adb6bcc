#pragma once

#include <memory>
#include <sstream>

#include "holomodel/forward_model.hpp"

namespace holomodel {

// Backward iteration toward a boundary repelling fixed point.  For ball
// domains every stage runs in the Siegel chart anchored at zeta: preimages
// are Newton solves on the exact conjugated map, and orbit points that would
// collapse onto the boundary in ball coordinates stay at full relative
// precision as large chart coordinates.

struct BackwardOptions {
    ModelOptions model;
    int newton_iters = 100;
    double step_cap = 10.0;  // bounded-step certificate cap on k(y_n, y_{n+1})
    double approach_tol = 1e-3;
    double step_tol = 1e-9;
};

struct BackwardOrbit {
    DomainSpec domain;
    BoundaryPoint zeta;
    double lambda_zeta = 0.0;         // dilation of f at zeta
    std::vector<CVec> points;         // y_n in bounded coordinates
    std::vector<CVec> chart_points;   // y_n in the zeta-chart (ball domains)
    std::shared_ptr<SiegelChart> chart;
    MapExpr chart_map;                // f conjugated to the chart (valid if chart)
    std::vector<double> step_seq;     // k(y_n, y_{n+1})
    double step_bound = 0.0;
    bool bounded_certified = false;
    // horocyclic heights must grow along a genuine orbit toward a repelling
    // point; fake branches produced at Newton's double-root resolution stall
    bool approach_certified = true;

    int length() const { return static_cast<int>(points.size()); }

    double dist(int i, int j) const {
        if (chart) return siegel_distance(chart_points[i], chart_points[j]);
        return kobayashi_distance(domain, points[i], points[j]);
    }
};

namespace detail {

inline CVec backward_newton_step(const MapExpr& F, const CVec& target, const CVec& seed,
                                 const BackwardOptions& opts) {
    auto solve_from = [&](CVec start) -> std::optional<CVec> {
        auto G = [&](const CVec& V) { return CVec(F.eval(V, false) - target); };
        auto J = [&](const CVec& V) { return F.jacobian(V); };
        NewtonOptions no;
        no.max_iters = opts.newton_iters;
        no.tol = 1e-13 * (1.0 + sup_mod(target));
        no.step_limit = 1e12;
        try {
            return newton_root(G, J, start, no);
        } catch (const PoleHit&) {
            return std::nullopt;
        }
    };
    std::vector<CVec> seeds{seed};
    for (double e : {0.05, -0.05}) {
        CVec s = seed;
        s[0] *= (1.0 + e);
        seeds.push_back(s);
        CVec si = seed;
        si[0] *= Complex(1.0, e);
        seeds.push_back(si);
    }
    std::optional<CVec> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const CVec& s : seeds) {
        auto sol = solve_from(s);
        if (!sol) continue;
        if (siegel_pairing(*sol, *sol).real() <= 0.0) continue; // left the chart domain
        double d = siegel_distance(*sol, seed);
        if (d < best_d) {
            best_d = d;
            best = sol;
        }
    }
    if (!best) throw NewtonFailed("no preimage found near the linearized seed");
    return *best;
}

} // namespace detail

inline void extend_backward_orbit(BackwardOrbit& orb, int target_len,
                                  const BackwardOptions& opts = {}) {
    if (!orb.chart) throw ModelNotConverged("backward orbit extension requires the chart engine");
    while (orb.length() < target_len) {
        const CVec& cur = orb.chart_points.back();
        CVec seed = cur;
        seed[0] *= orb.lambda_zeta; // linearization at the repelling anchor
        if (orb.length() >= 2) {
            // once two points exist, the previous expansion factor is a
            // better predictor than the raw dilation
            Complex ratio = orb.chart_points.back()[0] / orb.chart_points[orb.length() - 2][0];
            seed = cur;
            seed[0] *= ratio;
        }
        CVec next = detail::backward_newton_step(orb.chart_map, cur, seed, opts);
        double step = siegel_distance(next, cur);
        if (step > opts.step_cap)
            throw StepUnbounded("backward step " + std::to_string(step) +
                                " exceeded the certificate cap");
        double hratio = siegel_pairing(next, next).real() / siegel_pairing(cur, cur).real();
        if (hratio < 1.0 + 0.15 * (orb.lambda_zeta - 1.0)) orb.approach_certified = false;
        orb.chart_points.push_back(next);
        orb.points.push_back(orb.chart->from_chart(next));
        orb.step_seq.push_back(step);
        orb.step_bound = std::max(orb.step_bound, step);
    }
    orb.bounded_certified = true;
}

inline BackwardOrbit backward_orbit(const MapExpr& f, const CVec& y0, const BoundaryPoint& zeta,
                                    int N, const BackwardOptions& opts = {}) {
    f.domain().require_inside(y0);
    DilationEstimate dil = boundary_dilation(f, zeta, 40, opts.model.dyn);
    if (!(dil.lambda > 1.0 + 1e-9))
        throw NotRepelling("zeta has dilation " + std::to_string(dil.lambda) +
                           "; backward orbits need a repelling boundary point");
    BackwardOrbit orb;
    orb.domain = f.domain();
    orb.zeta = zeta;
    orb.lambda_zeta = dil.lambda;
    if (f.domain().kind != DomainKind::Ball)
        throw ModelNotConverged("backward orbits are implemented for ball domains");
    orb.chart = std::make_shared<SiegelChart>(f.domain(), zeta);
    orb.chart_map = orb.chart->conjugate(f);
    orb.points.push_back(y0);
    orb.chart_points.push_back(orb.chart->to_chart(y0));
    extend_backward_orbit(orb, N + 1, opts);
    return orb;
}

// ---------------------------------------------------------------------------
// Backward steps and the rate mu.

inline StepEstimate backward_step_sigma(const BackwardOrbit& orb, int m,
                                        const BackwardOptions& opts = {}) {
    StepEstimate est;
    if (m == 0) {
        est.converged = true;
        return est;
    }
    if (orb.length() < m + 5) throw OrbitTooShort("need at least m + 5 backward orbit points");
    double prev = -std::numeric_limits<double>::infinity();
    for (int n = 0; n + m < orb.length(); ++n) {
        double d = orb.dist(n, n + m);
        est.sequence.push_back(d);
        est.value = d;
        est.n_star = n;
        // smallest n whose successive increase falls below step_tol
        if (d - prev < opts.step_tol) {
            est.converged = true;
            break;
        }
        prev = d;
    }
    return est;
}

struct BackwardRate {
    double mu = 1.0;
    std::vector<double> per_m; // exp(scaled sigma_m / m)
    int m_used = 0;
};

inline BackwardRate backward_rate_mu(const BackwardOrbit& orb, int m_max,
                                     const BackwardOptions& opts = {}) {
    if (!orb.bounded_certified && orb.length() > 1)
        throw StepUnbounded("orbit lacks a bounded-step certificate");
    BackwardRate rate;
    rate.mu = std::numeric_limits<double>::infinity();
    int cap = std::min(m_max, orb.length() - 5);
    if (cap < 1) {
        // degenerate orbits (constant at a fixed point) have all steps zero
        rate.mu = 1.0;
        return rate;
    }
    for (int m = 1; m <= cap; ++m) {
        double sigma = backward_step_sigma(orb, m, opts).value;
        double v = std::exp(kRateLengthScale * sigma / m);
        rate.per_m.push_back(v);
        rate.mu = std::min(rate.mu, v);
        rate.m_used = m;
    }
    return rate;
}

// ---------------------------------------------------------------------------
// Canonical pre-model.

struct PreModel {
    int retract_dim = 0;
    double mu = 1.0;        // rate of the normal form (> 1)
    double mu_orbit = 1.0;  // exp(min scaled sigma_m / m) from the orbit
    double lambda_zeta = 0.0;
    std::vector<double> angles;
    bool normal_form_available = false;
    NormalForm phi;             // lomo4-type action on H^k
    HoloEval intertwiner;       // H^k -> X
    HoloEval intertwiner_chart; // H^k -> zeta-chart coordinates (exact at depth)
    ConvergenceReport limit_report;
    RankEstimate rank_detail;
    double commutation_residual = 0.0;
    double fit_residual = 0.0;
    int stable_spot_checks = 0;
    int stable_spot_hits = 0;
    std::vector<std::string> warnings;
};

namespace detail {

// alpha_0 = lim_m f^m o h_m along the backward orbit, computed in the chart:
// A_m(xi) = F^m(G_m(gauge_m(xi))) with G_m the horospherical frame at the
// m-th backward orbit point.
struct BackwardLimit {
    std::shared_ptr<SiegelChart> chart;
    MapExpr F;
    int M = 0;
    std::vector<SiegelFrame> frames;
    std::vector<CMat> gauges;
    ConvergenceReport report;

    CVec apply_gauged(int m, const CVec& xi) const {
        CVec z = xi;
        if (gauges[m].rows() > 0)
            z.tail(z.size() - 1) = CVec(gauges[m] * z.tail(z.size() - 1));
        return frames[m].apply(z);
    }
    CVec apply_gauged_inverse(int m, const CVec& z) const {
        CVec xi = frames[m].apply_inverse(z);
        if (gauges[m].rows() > 0)
            xi.tail(xi.size() - 1) = CVec(gauges[m].adjoint() * xi.tail(xi.size() - 1));
        return xi;
    }

    CVec alpha_chart(const CVec& xi) const {
        CVec z = apply_gauged(M, xi);
        for (int i = 0; i < M; ++i) z = F.eval(z, false);
        return z;
    }

    // tau = lim_m (gauged frame_m)^{-1} o (gauged frame_{m-1}); exact affine
    // algebra, valid for non-univalent f
    CVec tau_chart(const CVec& eta) const {
        return apply_gauged_inverse(M, apply_gauged(M - 1, eta));
    }
};

inline BackwardLimit backward_direct_limit(BackwardOrbit& orb, const std::vector<CVec>& grid_chart,
                                           double tol, const BackwardOptions& opts) {
    BackwardLimit lim;
    lim.chart = orb.chart;
    lim.F = orb.chart_map;
    const int q = static_cast<int>(orb.points.front().size());

    std::vector<CVec> prev_img(grid_chart.size());
    CMat pchain = CMat::Identity(q, q); // J_F(V_1) ... J_F(V_m)
    lim.frames.push_back(SiegelFrame::at(orb.chart_points[0]));
    lim.gauges.push_back(CMat::Identity(std::max(q - 1, 0), std::max(q - 1, 0)));
    for (std::size_t g = 0; g < grid_chart.size(); ++g)
        prev_img[g] = lim.frames[0].apply(grid_chart[g]);

    int hits = 0;
    for (int m = 1; m <= opts.model.horizon_max; ++m) {
        if (orb.length() <= m + 1) {
            try {
                extend_backward_orbit(orb, m + 2, opts);
            } catch (const Error&) {
                break;
            }
        }
        SiegelFrame g = SiegelFrame::at(orb.chart_points[m]);
        pchain = pchain * lim.F.jacobian(orb.chart_points[m]);
        CMat W = CMat::Identity(std::max(q - 1, 0), std::max(q - 1, 0));
        if (q > 1) {
            // gauge from the polar factor of the accumulated differential;
            // dG = [[rho, sqrt(rho) 2i b^H], [0, sqrt(rho) I]]
            const double sr = std::sqrt(g.rho);
            CMat dG = CMat::Zero(q, q);
            dG(0, 0) = g.rho;
            for (int j = 1; j < q; ++j) dG(0, j) = 2.0 * kImagUnit * std::conj(g.b[j - 1]) * sr;
            dG.block(1, 1, q - 1, q - 1) = sr * CMat::Identity(q - 1, q - 1);
            CMat B = (pchain * dG).block(1, 1, q - 1, q - 1);
            Eigen::JacobiSVD<CMat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
            W = svd.matrixV() * svd.matrixU().adjoint();
        }
        lim.frames.push_back(g);
        lim.gauges.push_back(W);

        double delta = 0.0;
        for (std::size_t gi = 0; gi < grid_chart.size(); ++gi) {
            CVec z = lim.apply_gauged(m, grid_chart[gi]);
            for (int i = 0; i < m; ++i) z = lim.F.eval(z, false);
            delta = std::max(delta, (z - prev_img[gi]).norm());
            prev_img[gi] = z;
        }
        lim.report.horizon_used = m;
        lim.report.sup_residual = delta;
        lim.M = m;
        if (delta < tol) {
            if (++hits >= opts.model.consecutive_hits) {
                lim.report.converged = true;
                break;
            }
        } else {
            hits = 0;
        }
    }
    return lim;
}

} // namespace detail

struct StableMembership {
    bool member = false;
    std::string reason;
    std::optional<BackwardOrbit> certificate;
};

inline StableMembership stable_membership(const MapExpr& f, const BoundaryPoint& zeta,
                                          const CVec& z, int N,
                                          const BackwardOptions& opts = {}) {
    StableMembership res;
    try {
        BackwardOrbit orb = backward_orbit(f, z, zeta, N, opts);
        double gap = (orb.points.back() - zeta.direction).norm();
        if (!orb.bounded_certified) {
            res.reason = "no bounded-step certificate";
        } else if (!orb.approach_certified) {
            res.reason = "orbit stalls away from zeta (no height growth)";
        } else if (gap >= opts.approach_tol) {
            res.reason = "orbit does not approach zeta (residual " + std::to_string(gap) + ")";
        } else {
            res.member = true;
            res.certificate = std::move(orb);
        }
    } catch (const Error& e) {
        res.reason = e.what();
    }
    return res;
}

inline PreModel canonical_pre_model(const MapExpr& f, BackwardOrbit orbit,
                                    const BackwardOptions& opts = {}) {
    PreModel model;
    model.lambda_zeta = orbit.lambda_zeta;
    if (!orbit.chart) {
        // interior orbit (elliptic short-circuit)
        model.retract_dim = 0;
        model.mu = 1.0;
        model.warnings.push_back("interior backward orbit: degenerate point pre-model");
        return model;
    }
    if (!(orbit.lambda_zeta > 1.0)) throw NotRepelling("pre-model requires a repelling zeta");
    if (orbit.length() < 40) {
        try {
            extend_backward_orbit(orbit, 40, opts);
        } catch (const Error&) {
            // keep the shorter orbit; the rate just uses fewer steps
        }
    }
    if (!orbit.bounded_certified) throw StepUnbounded("orbit lacks a bounded-step certificate");

    BackwardRate rate = backward_rate_mu(orbit, 12, opts);
    model.mu_orbit = rate.mu;

    // chart grid around the base point (i, 0)
    const int q = f.dim();
    std::vector<CVec> grid_chart;
    {
        auto ball_grid = interior_samples(f.domain(), opts.model.grid_size, opts.model.seed, 0.6);
        for (const CVec& x : ball_grid) grid_chart.push_back(orbit.chart->to_chart(x));
    }
    detail::BackwardLimit lim =
        detail::backward_direct_limit(orbit, grid_chart, opts.model.limit_tol, opts);
    model.limit_report = lim.report;
    if (!lim.report.converged)
        throw ModelNotConverged("backward renormalized compositions did not plateau");

    // rank of alpha_0 in chart coordinates at interior probes
    HoloEval alpha_chart{DomainSpec::siegel(q), q,
                         [lim](const CVec& xi) { return lim.alpha_chart(xi); }};
    std::vector<CVec> probes;
    for (const CVec& x : interior_samples(f.domain(), 3, opts.model.seed ^ 0x77, 0.4))
        probes.push_back(orbit.chart->to_chart(x));
    model.rank_detail = retract_rank(alpha_chart, probes, opts.model.svd_tol);
    model.retract_dim = model.rank_detail.k;

    if (model.retract_dim != 1 || q != 1) {
        model.normal_form_available = false;
        model.warnings.push_back("backward normal form constructed for one-dimensional retracts only");
        model.mu = model.mu_orbit;
        return model;
    }

    // tau on the retract from the frame-transition limit, pulled to disc
    // coordinates of the base space and fitted as a Moebius map
    auto chart = orbit.chart;
    auto tau_ball = [lim, chart](Complex t) {
        return chart->from_chart(lim.tau_chart(chart->to_chart(cvec1(t))))[0];
    };
    std::vector<std::pair<Complex, Complex>> samples;
    for (const CVec& z : interior_samples(DomainSpec::ball(1), 12, opts.model.seed ^ 0xfa, 0.7))
        samples.push_back({z[0], tau_ball(z[0])});
    MoebiusFit fit = fit_moebius(samples);
    model.fit_residual = fit.residual;
    if (fit.residual > 1e-5)
        model.warnings.push_back("tau is far from a Moebius map of the retract chart");

    MoebiusDynamics dyn = analyze_moebius(fit.map, false);
    model.mu = 1.0 / dyn.multiplier_attracting;
    if (model.mu < orbit.lambda_zeta - 1e-6)
        model.warnings.push_back("model rate fell below the dilation at zeta");
    if (std::abs(model.mu - model.mu_orbit) > 2e-2)
        model.warnings.push_back("model rate and orbit rate estimate disagree");
    if (dyn.attracting.at_infinity || dyn.repelling.at_infinity)
        throw ModelNotConverged("fixed points of tau escaped the base chart");

    // gamma sends the repelling end of tau to infinity (the repelling point
    // of the normal form), the attracting end to 0
    ScalarMoebius g0 = disc_pair_to_halfplane(dyn.repelling.value, dyn.attracting.value);
    Complex tstar = 0.0; // base-space parameter of y_0's backward orbit class
    Complex vstar = g0.apply(tstar);
    ScalarMoebius gamma = halfplane_scale(1.0 / std::abs(vstar)).after(g0);
    model.phi = NormalForm{ModelKind::Hyperbolic, 1, model.mu, +1, {}};
    model.normal_form_available = true;

    // base parameter -> chart coordinate of the model argument, composed as a
    // single Moebius map so that deep evaluations never round-trip through
    // bounded coordinates
    ScalarMoebius param_chain{chart->scalar_to_chart_matrix() * gamma.inverse().M};
    model.intertwiner_chart = HoloEval{DomainSpec::siegel(1), q,
                                       [lim, param_chain](const CVec& w) {
                                           return lim.alpha_chart(cvec1(param_chain.apply(w[0])));
                                       }};
    HoloEval hc = model.intertwiner_chart;
    model.intertwiner = HoloEval{DomainSpec::siegel(1), q, [hc, chart](const CVec& w) {
                                     return chart->from_chart(hc(w));
                                 }};

    // commutation residual d_X(f(h(w)), h(phi(w))) on an H grid, measured in
    // the zeta-chart where it is exact at depth
    MapExpr F = orbit.chart_map;
    double resid = 0.0;
    std::mt19937_64 rng(opts.model.seed ^ 0xbac);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(0.3, 4.0);
    for (int i = 0; i < 16; ++i) {
        CVec w = cvec1(Complex(ux(rng), uy(rng)));
        CVec a = hc(model.phi.apply(w));
        CVec b = F.eval(hc(w), false);
        resid = std::max(resid, siegel_distance(a, b));
    }
    model.commutation_residual = resid;
    if (resid > opts.model.commute_tol)
        model.warnings.push_back("commutation residual above commute_tol");

    // image property: spot-check that intertwiner values admit bounded-step
    // backward orbits toward zeta
    model.stable_spot_checks = 8;
    for (int i = 0; i < model.stable_spot_checks; ++i) {
        CVec w = cvec1(Complex(ux(rng), uy(rng)));
        CVec x = model.intertwiner(w);
        if (!f.domain().contains(x, 1e-9)) continue;
        auto sm = stable_membership(f, orbit.zeta, x, 12, opts);
        if (sm.member) ++model.stable_spot_hits;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Pre-model verification.

struct PreModelVerification {
    bool degenerate = false;
    double commutation = 0.0;
    std::vector<std::pair<int, double>> pullback; // (m, sup residual)
    bool pullback_monotone = true;
    double boundary_residual = 0.0; // |h(iT) - zeta| at T = 1e6
    double mu = 0.0, lambda = 0.0;
};

inline PreModelVerification verify_pre_model(const MapExpr& f, const PreModel& model,
                                             const BackwardOrbit& orbit, int grid_size = 12,
                                             const BackwardOptions& opts = {}) {
    PreModelVerification ver;
    ver.mu = model.mu;
    ver.lambda = model.lambda_zeta;
    if (!model.normal_form_available) {
        ver.degenerate = true;
        return ver;
    }
    auto chart = orbit.chart;
    MapExpr F = orbit.chart_map;
    auto h_chart = [&](const CVec& w) { return model.intertwiner_chart(w); };

    std::mt19937_64 rng(opts.model.seed ^ 0x5eed);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(0.3, 4.0);
    std::vector<CVec> ws;
    for (int i = 0; i < grid_size; ++i) ws.push_back(cvec1(Complex(ux(rng), uy(rng))));

    for (const CVec& w : ws) {
        CVec a = F.eval(h_chart(model.phi.apply_inverse(w)), false);
        CVec b = h_chart(w);
        ver.commutation = std::max(ver.commutation, siegel_distance(a, b));
    }

    // pullback: |k_X(h(phi^{-m} w), h(phi^{-m} w')) - d_{H^k}(w, w')|
    for (int cp : {1, 2, 5, 10, 20, 30}) {
        double sup = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i + 1 < ws.size(); i += 2) {
            CVec w1 = ws[i], w2 = ws[i + 1];
            for (int m = 0; m < cp; ++m) {
                w1 = model.phi.apply_inverse(w1);
                w2 = model.phi.apply_inverse(w2);
            }
            try {
                double dx = siegel_distance(h_chart(w1), h_chart(w2));
                sup = std::max(sup, std::abs(dx - siegel_distance(ws[i], ws[i + 1])));
            } catch (const Error&) {
                ok = false;
                break;
            }
        }
        if (!ok) break;
        ver.pullback.push_back({cp, sup});
    }
    for (std::size_t i = 0; i + 1 < ver.pullback.size(); ++i)
        if (ver.pullback[i + 1].second > ver.pullback[i].second + 1e-12)
            ver.pullback_monotone = false;

    CVec deep = model.intertwiner(cvec1(Complex(0.0, 1e6)));
    ver.boundary_residual = (deep - orbit.zeta.direction).norm();
    return ver;
}

// ---------------------------------------------------------------------------
// CSV dump: n, re/im of each coordinate, k(y_n, y_{n+1}).

inline std::string backward_orbit_csv(const BackwardOrbit& orb) {
    std::ostringstream out;
    out << "n";
    for (int j = 0; j < static_cast<int>(orb.points.front().size()); ++j)
        out << ",re" << j << ",im" << j;
    out << ",step\n";
    char buf[64];
    for (int n = 0; n < orb.length(); ++n) {
        out << n;
        for (Eigen::Index j = 0; j < orb.points[n].size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", orb.points[n][j].real(),
                          orb.points[n][j].imag());
            out << buf;
        }
        if (n + 1 < orb.length()) {
            std::snprintf(buf, sizeof buf, ",%.17g", orb.dist(n, n + 1));
            out << buf;
        } else {
            out << ",";
        }
        out << "\n";
    }
    return out.str();
}

} // namespace holomodel
