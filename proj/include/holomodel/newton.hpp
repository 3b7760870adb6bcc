#pragma once

#include <functional>
#include <optional>

#include "holomodel/types.hpp"

namespace holomodel {

struct NewtonOptions {
    int max_iters = 100;
    double tol = 1e-12;       // on the residual norm
    double step_limit = 1e6;  // reject exploding updates
};

// Square Newton for F(x) = 0 with user-supplied Jacobian.
inline std::optional<CVec> newton_root(const std::function<CVec(const CVec&)>& F,
                                       const std::function<CMat(const CVec&)>& J, CVec x,
                                       const NewtonOptions& opts = {}) {
    for (int it = 0; it < opts.max_iters; ++it) {
        CVec r = F(x);
        if (r.norm() <= opts.tol) return x;
        CVec dx = J(x).fullPivLu().solve(r);
        if (!all_finite(dx) || dx.norm() > opts.step_limit) return std::nullopt;
        x -= dx;
    }
    CVec r = F(x);
    if (r.norm() <= opts.tol * 10) return x;
    return std::nullopt;
}

// Central finite-difference Jacobian; real steps suffice for holomorphic maps.
inline CMat numeric_jacobian(const std::function<CVec(const CVec&)>& fn, const CVec& p,
                             double h = 1e-5) {
    CVec f0 = fn(p);
    CMat J(f0.size(), p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        CVec pp = p, pm = p;
        pp[j] += h;
        pm[j] -= h;
        J.col(j) = (fn(pp) - fn(pm)) / (2.0 * h);
    }
    return J;
}

// Gauss-Newton least-squares step for underdetermined sections: minimizes
// |F(x)| with pseudo-inverse updates.  Returns a point with |F| <= tol, if
// reached.
inline std::optional<CVec> gauss_newton(const std::function<CVec(const CVec&)>& F,
                                        const std::function<CMat(const CVec&)>& J, CVec x,
                                        const NewtonOptions& opts = {}) {
    for (int it = 0; it < opts.max_iters; ++it) {
        CVec r = F(x);
        if (r.norm() <= opts.tol) return x;
        Eigen::JacobiSVD<CMat> svd(J(x), Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        CVec dx = svd.solve(r);
        if (!all_finite(dx) || dx.norm() > opts.step_limit) return std::nullopt;
        x -= dx;
    }
    CVec r = F(x);
    if (r.norm() <= opts.tol * 10) return x;
    return std::nullopt;
}

} // namespace holomodel
