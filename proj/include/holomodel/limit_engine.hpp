#pragma once

#include <functional>
#include <memory>

#include "holomodel/chart.hpp"
#include "holomodel/geometry.hpp"
#include "holomodel/map_expr.hpp"
#include "holomodel/newton.hpp"

namespace holomodel {

// Engine for the renormalized limits alpha_n = lim_m (frame_m o f^m).
//
// When the reference orbit crowds the boundary, ball-coordinate frames lose
// one bit of relative precision per step (differences of near-unit doubles),
// which caps the attainable plateau far above useful tolerances.  The engine
// therefore recenters in an unbounded chart anchored at the orbit's boundary
// limit: the Siegel half-space for the ball, a per-coordinate product of
// half-planes and discs for the polydisc.  Frames there are exact affine or
// small Moebius maps and the limit plateaus to machine precision.
//
// Frames carry a gauge: the unitary block is chosen by polar decomposition of
// the accumulated orbit differential, which removes the rotational drift that
// would otherwise confine convergence to subsequences.

class LimitEngine {
public:
    std::function<CVec(const CVec&)> to_chart;
    std::function<CVec(const CVec&)> from_chart;
    MapExpr F;          // the map in chart coordinates (evaluated unchecked)
    bool charted = false;
    bool exhausted = false; // frames can no longer be extended safely

    virtual ~LimitEngine() = default;
    virtual void extend(int m) = 0;
    int frames() const { return frame_count_; }

    // recenter chart point xi relative to frame m
    virtual CVec recenter(int m, const CVec& xi) const = 0;
    // inverse of recenter (the frame h_m itself)
    virtual CVec unrecenter(int m, const CVec& eta) const = 0;

protected:
    int frame_count_ = 0;
};

// ---------------------------------------------------------------------------
// Interior orbits: plain ball/polydisc frames.

class InteriorEngine final : public LimitEngine {
public:
    InteriorEngine(MapExpr f, std::vector<CVec> orbit_seed, CVec x0)
        : f_(std::move(f)), orbit_(std::move(orbit_seed)), x0_(std::move(x0)) {
        to_chart = [](const CVec& z) { return z; };
        from_chart = [](const CVec& z) { return z; };
        F = f_;
        charted = false;
        extend(1);
    }

    void extend(int m) override {
        while (static_cast<int>(orbit_.size()) <= m + 1 && !exhausted) {
            CVec next = f_.eval(orbit_.back(), false);
            if (f_.domain().boundary_gap(next) < 1e-13) {
                exhausted = true;
                break;
            }
            orbit_.push_back(next);
        }
        while (frame_count_ < m + 1 &&
               frame_count_ + 1 < static_cast<int>(orbit_.size())) {
            int n = frame_count_;
            frames_.push_back(frame_to_origin(f_.domain(), orbit_[n], orbit_[n + 1]));
            ++frame_count_;
        }
    }

    CVec recenter(int m, const CVec& xi) const override { return frames_[m].apply(xi); }
    CVec unrecenter(int m, const CVec& eta) const override {
        return frames_[m].apply_inverse(eta);
    }

private:
    MapExpr f_;
    std::vector<CVec> orbit_;
    CVec x0_;
    std::vector<BallAutomorphism> frames_;
};

// ---------------------------------------------------------------------------
// Ball orbits converging to a boundary point: Siegel chart engine.

class SiegelEngine final : public LimitEngine {
public:
    SiegelEngine(const MapExpr& f, const BoundaryPoint& anchor, const CVec& x0)
        : chart_(f.domain(), anchor), q_(f.dim()) {
        F = chart_.conjugate(f);
        SiegelChart chart = chart_;
        to_chart = [chart](const CVec& z) { return chart.to_chart(z); };
        from_chart = [chart](const CVec& Z) { return chart.from_chart(Z); };
        charted = true;
        orbit_.push_back(chart_.to_chart(x0));
        jorb_.push_back(CMat::Identity(q_, q_));
        push_frame();
        extend(1);
    }

    void extend(int m) override {
        while (frame_count_ < m + 1 && !exhausted) {
            const CVec& cur = orbit_.back();
            CVec next;
            try {
                next = F.eval(cur, false);
            } catch (const PoleHit&) {
                exhausted = true;
                break;
            }
            double h = siegel_pairing(next, next).real();
            if (!all_finite(next) || h <= 0.0 || h > 1e280) {
                exhausted = true;
                break;
            }
            jorb_.push_back(CMat(F.jacobian(cur) * jorb_.back()));
            orbit_.push_back(next);
            push_frame();
        }
    }

    CVec recenter(int m, const CVec& xi) const override {
        CVec eta = frames_[m].apply_inverse(xi);
        if (q_ > 1) eta.tail(q_ - 1) = CVec(gauges_[m] * eta.tail(q_ - 1));
        return eta;
    }

    CVec unrecenter(int m, const CVec& eta) const override {
        CVec xi = eta;
        if (q_ > 1) xi.tail(q_ - 1) = CVec(gauges_[m].adjoint() * xi.tail(q_ - 1));
        return frames_[m].apply(xi);
    }

private:
    void push_frame() {
        const CVec& V = orbit_.back();
        SiegelFrame g = SiegelFrame::at(V);
        CMat W = CMat::Identity(std::max(q_ - 1, 0), std::max(q_ - 1, 0));
        if (q_ > 1) {
            // d(G^{-1}) = diag(1/rho, I/sqrt(rho)) * [[1, -2i b^H], [0, I]]
            CMat dGinv = CMat::Identity(q_, q_);
            for (int j = 1; j < q_; ++j) dGinv(0, j) = -2.0 * kImagUnit * std::conj(g.b[j - 1]);
            dGinv.row(0) /= g.rho;
            dGinv.block(1, 1, q_ - 1, q_ - 1) /= std::sqrt(g.rho);
            CMat A = dGinv * jorb_.back();
            CMat B = A.block(1, 1, q_ - 1, q_ - 1);
            Eigen::JacobiSVD<CMat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
            CMat P = svd.matrixU() * svd.matrixV().adjoint();
            W = P.adjoint();
        }
        frames_.push_back(g);
        gauges_.push_back(W);
        ++frame_count_;
    }

    SiegelChart chart_;
    int q_;
    std::vector<CVec> orbit_; // chart coordinates, exact large-number arithmetic
    std::vector<CMat> jorb_;  // d(F^m) at the chart base point
    std::vector<SiegelFrame> frames_;
    std::vector<CMat> gauges_;
};

// ---------------------------------------------------------------------------
// Polydisc orbits: per-coordinate half-plane/disc chart.

class PolydiscEngine final : public LimitEngine {
public:
    PolydiscEngine(const MapExpr& f, const CVec& deep, const CVec& x0) : q_(f.dim()) {
        use_h_.resize(q_);
        phase_.resize(q_);
        for (int j = 0; j < q_; ++j) {
            use_h_[j] = std::abs(deep[j]) > 1.0 - 1e-3;
            phase_[j] = use_h_[j] ? Complex(deep[j] / std::abs(deep[j])) : Complex(1.0);
        }
        // chart C and its inverse as exact rational maps
        std::vector<RationalComponent> c_comps, cinv_comps;
        for (int j = 0; j < q_; ++j) {
            if (use_h_[j]) {
                Complex pj = phase_[j];
                Poly den = Poly::constant(q_, 1.0) - Poly::variable(q_, j, std::conj(pj));
                c_comps.push_back(
                    {Poly::constant(q_, kImagUnit) + Poly::variable(q_, j, kImagUnit * std::conj(pj)),
                     den});
                Poly deni = Poly::variable(q_, j) + Poly::constant(q_, kImagUnit);
                cinv_comps.push_back(
                    {Poly::variable(q_, j, pj) - Poly::constant(q_, kImagUnit * pj), deni});
            } else {
                c_comps.push_back({Poly::variable(q_, j), Poly::constant(q_, 1.0)});
                cinv_comps.push_back({Poly::variable(q_, j), Poly::constant(q_, 1.0)});
            }
        }
        MapExpr C(f.domain(), c_comps, "chart");
        MapExpr Cinv(f.domain(), cinv_comps, "chart_inv");
        F = compose_symbolic(C, compose_symbolic(f, Cinv)).with_label("f@chart");
        to_chart = [C](const CVec& z) { return C.eval_raw(z); };
        from_chart = [Cinv](const CVec& Z) { return Cinv.eval_raw(Z); };
        charted = true;
        orbit_.push_back(to_chart(x0));
        jorb_.push_back(CMat::Identity(q_, q_));
        push_frame();
        extend(1);
    }

    void extend(int m) override {
        while (frame_count_ < m + 1 && !exhausted) {
            const CVec& cur = orbit_.back();
            CVec next;
            try {
                next = F.eval(cur, false);
            } catch (const PoleHit&) {
                exhausted = true;
                break;
            }
            bool ok = all_finite(next);
            for (int j = 0; j < q_ && ok; ++j) {
                if (use_h_[j])
                    ok = next[j].imag() > 0.0 && std::abs(next[j]) < 1e280;
                else
                    ok = std::abs(next[j]) < 1.0 - 1e-13;
            }
            if (!ok) {
                exhausted = true;
                break;
            }
            jorb_.push_back(CMat(F.jacobian(cur) * jorb_.back()));
            orbit_.push_back(next);
            push_frame();
        }
    }

    CVec recenter(int m, const CVec& xi) const override {
        const auto& fr = frames_[m];
        CVec out(q_);
        for (int j = 0; j < q_; ++j) {
            if (use_h_[j])
                out[j] = (xi[j] - fr.t[j]) / fr.rho[j];
            else
                out[j] = fr.gauge[j] * (xi[j] - fr.c[j]) / (1.0 - std::conj(fr.c[j]) * xi[j]);
        }
        return out;
    }

    CVec unrecenter(int m, const CVec& eta) const override {
        const auto& fr = frames_[m];
        CVec out(q_);
        for (int j = 0; j < q_; ++j) {
            if (use_h_[j]) {
                out[j] = fr.rho[j] * eta[j] + fr.t[j];
            } else {
                Complex w = eta[j] / fr.gauge[j];
                out[j] = (w + fr.c[j]) / (1.0 + std::conj(fr.c[j]) * w);
            }
        }
        return out;
    }

private:
    struct Frame {
        std::vector<double> rho, t; // H coordinates
        std::vector<Complex> c, gauge; // disc coordinates
    };

    void push_frame() {
        const CVec& V = orbit_.back();
        Frame fr;
        fr.rho.assign(q_, 1.0);
        fr.t.assign(q_, 0.0);
        fr.c.assign(q_, 0.0);
        fr.gauge.assign(q_, 1.0);
        for (int j = 0; j < q_; ++j) {
            if (use_h_[j]) {
                fr.rho[j] = V[j].imag();
                fr.t[j] = V[j].real();
            } else {
                fr.c[j] = V[j];
                // phase gauge from the accumulated diagonal differential
                Complex d = jorb_.back()(j, j) / (1.0 - std::norm(V[j]));
                if (std::abs(d) > 1e-13) fr.gauge[j] = std::conj(d) / std::abs(d);
            }
        }
        frames_.push_back(fr);
        ++frame_count_;
    }

    int q_;
    std::vector<bool> use_h_;
    std::vector<Complex> phase_;
    std::vector<CVec> orbit_;
    std::vector<CMat> jorb_;
    std::vector<Frame> frames_;
};

// ---------------------------------------------------------------------------
// Engine selection from the reference orbit.

inline std::shared_ptr<LimitEngine> make_limit_engine(
    const MapExpr& f, const CVec& x0, const std::vector<CVec>& orbit,
    const std::function<std::optional<CVec>(const CVec&)>& boundary_polish = {}) {
    const DomainSpec X = f.domain();
    const CVec& deep = orbit.back();
    bool to_boundary = orbit.size() >= 4 && X.boundary_gap(deep) < 1e-3 &&
                       X.boundary_gap(deep) < 0.5 * X.boundary_gap(orbit[orbit.size() / 2]);
    if (to_boundary && X.kind == DomainKind::Ball) {
        CVec dir = deep / deep.norm();
        if (boundary_polish) {
            if (auto polished = boundary_polish(dir)) dir = *polished / polished->norm();
        }
        return std::make_shared<SiegelEngine>(f, BoundaryPoint::of(dir), x0);
    }
    if (to_boundary && X.kind == DomainKind::Polydisc) {
        CVec anchor = deep;
        if (boundary_polish) {
            if (auto polished = boundary_polish(deep)) anchor = *polished;
        }
        return std::make_shared<PolydiscEngine>(f, anchor, x0);
    }
    return std::make_shared<InteriorEngine>(f, orbit, x0);
}

} // namespace holomodel
