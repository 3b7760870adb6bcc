#include <catch2/catch_amalgamated.hpp>

#include <holomodel/forward_model.hpp>

#include "test_maps.hpp"

using namespace holomodel;
using namespace testmaps;

namespace {

// Independent oracle for hyperbolic intertwiners: the renormalized limit
// h*(x) = lim lambda^m Psi(f^m(x)) in the half-plane chart at the
// Denjoy-Wolff point 1.  Used only to cross-check the section-based route.
// Depth 26 balances truncation against the near-boundary rounding of Psi.
Complex bgp_limit(const MapExpr& f, double lambda, Complex x, int iters = 26) {
    Complex z = x;
    Complex v = 0.0;
    double scale = 1.0;
    for (int m = 0; m < iters; ++m) {
        v = scale * (kImagUnit * (1.0 + z) / (1.0 - z));
        z = f.eval(cvec1(z), false)[0];
        scale *= lambda;
    }
    return v;
}

// B^2 hyperbolic automorphism: Cayley conjugate of the Siegel dilation
// (z, w) -> (2z, sqrt(2) e^{i pi/3} w).
MapExpr ball2_hyperbolic_automorphism() {
    CMat D = CMat::Zero(2, 2);
    D(0, 0) = 2.0;
    D(1, 1) = std::sqrt(2.0) * std::polar(1.0, M_PI / 3.0);
    MapExpr dil = linear_map_expr(D, DomainSpec::siegel(2));
    MapExpr mid = compose_symbolic(dil, cayley_map_expr(2));
    return compose_symbolic(inverse_cayley_map_expr(2), mid)
        .with_domain(DomainSpec::ball(2))
        .with_label("B2 hyperbolic aut");
}

} // namespace

TEST_CASE("renormalized system frames and cocycle") {
    auto sysc = build_renormalized_system(contraction_half(), pt(0.0), 8);
    for (const auto& a : sysc.autos) CHECK(a.is_identity());

    auto sys = build_renormalized_system(half_affine(), pt(0.0), 8);
    CHECK(std::abs(sys.orbit[2][0] - 0.75) < 1e-16);
    CHECK(std::abs(sys.autos[2].apply(pt(0.75))[0]) < 1e-15);
    for (int n = 0; n <= sys.horizon(); ++n)
        CHECK(sys.autos[n].apply(sys.orbit[n]).norm() <= 1e-12);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int i = 0; i < 50; ++i) {
        CVec x = pt(Complex(u(rng), u(rng)));
        CVec a = sys.renorm(0, 2, x);
        CVec b = sys.renorm(1, 2, sys.renorm(0, 1, x));
        CHECK((a - b).norm() <= 1e-10);
    }
}

TEST_CASE("direct limit maps") {
    ModelOptions opts;
    auto grid = interior_samples(DomainSpec::ball(1), 16, 5, 0.7);

    // elliptic: limit map collapses to the fixed point
    auto sys0 = build_renormalized_system(contraction_half(), pt(0.0), 8);
    auto lim0 = direct_limit_map(sys0, 0, grid, 1e-9, opts);
    CHECK(lim0.report.converged);
    for (const auto& x : grid) CHECK(lim0.alpha(x).norm() < 1e-8);
    auto rank0 = retract_rank(lim0.alpha, interior_samples(DomainSpec::ball(1), 3, 6, 0.5));
    CHECK(rank0.k == 0);

    // hyperbolic non-automorphism: geometric convergence
    auto sys1 = build_renormalized_system(half_affine(), pt(0.0), 8);
    auto lim1 = direct_limit_map(sys1, 0, grid, 1e-9, opts);
    CHECK(lim1.report.converged);
    CHECK(lim1.report.sup_residual <= 1e-8);
    CHECK(lim1.M <= 60);

    // oracle: pushing the horizon 8 steps further moves nothing beyond 1e-8
    {
        int M2 = lim1.M + 8;
        auto& eng = sys1.engine();
        eng.extend(M2);
        REQUIRE(eng.frames() > M2);
        double diff = 0.0;
        for (const auto& y : grid) {
            CVec z = eng.to_chart(y);
            for (int i = 0; i < M2; ++i) z = eng.F.eval(z, false);
            diff = std::max(diff, (eng.from_chart(eng.recenter(M2, z)) - lim1.alpha(y)).norm());
        }
        CHECK(diff <= 1e-8);
    }

    // compatibility alpha_m o f^{m-n} = alpha_n
    auto lim3 = direct_limit_map(sys1, 3, grid, 1e-9, opts);
    for (const auto& y : grid) {
        CVec fy = y;
        for (int i = 0; i < 3; ++i) fy = half_affine().eval(fy, false);
        CHECK((lim3.alpha(fy) - lim1.alpha(y)).norm() <= 3e-9);
    }

    // automorphism: stabilizes immediately, alpha is an isometry
    auto sys2 = build_renormalized_system(aut_hyperbolic(), pt(0.0), 8);
    auto lim2 = direct_limit_map(sys2, 0, grid, 1e-9, opts);
    CHECK(lim2.report.converged);
    CHECK(lim2.M <= 8);
    for (std::size_t i = 0; i + 1 < grid.size(); i += 2) {
        double before = kobayashi_distance(DomainSpec::ball(1), grid[i], grid[i + 1]);
        double after =
            kobayashi_distance(DomainSpec::ball(1), lim2.alpha(grid[i]), lim2.alpha(grid[i + 1]));
        CHECK_THAT(after, Catch::Matchers::WithinAbs(before, 1e-9));
    }

    // retraction idempotence: the diagonal limit alpha_N o h_N^{-1} fixes the
    // image of alpha_0
    {
        const int N = 24;
        auto limN = direct_limit_map(sys1, N, grid, 1e-9, opts);
        auto& eng = sys1.engine();
        for (const auto& y : grid) {
            CVec z = lim1.alpha(y);
            CVec lifted = eng.from_chart(eng.unrecenter(N, eng.to_chart(z)));
            CHECK((limN.alpha(lifted) - z).norm() <= 1e-6);
        }
    }
}

TEST_CASE("retract rank") {
    ModelOptions opts;
    auto probes1 = interior_samples(DomainSpec::ball(1), 3, 7, 0.5);
    auto sys1 = build_renormalized_system(half_affine(), pt(0.0), 8);
    auto lim1 = direct_limit_map(sys1, 0, interior_samples(DomainSpec::ball(1), 16, 5, 0.7), 1e-9, opts);
    CHECK(retract_rank(lim1.alpha, probes1).k == 1);

    auto P2 = DomainSpec::polydisc(2);
    auto sysP = build_renormalized_system(polydisc_collapse(), pt2(0.0, 0.0), 8);
    auto limP = direct_limit_map(sysP, 0, interior_samples(P2, 16, 5, 0.7), 1e-9, opts);
    auto rankP = retract_rank(limP.alpha, interior_samples(P2, 3, 7, 0.5));
    CHECK(rankP.k == 1);
    for (int v : rankP.votes) CHECK(v == 1);
    // brute-force corroboration: second singular value collapses
    CHECK(rankP.sigmas[1] / rankP.sigmas[0] < 1e-6);

    auto B2 = DomainSpec::ball(2);
    MapExpr aut2 = ball2_hyperbolic_automorphism();
    REQUIRE(validate_self_map(aut2, 400, 2).passed);
    auto sysA = build_renormalized_system(aut2, pt2(0.0, 0.0), 8);
    auto limA = direct_limit_map(sysA, 0, interior_samples(B2, 16, 5, 0.6), 1e-9, opts);
    CHECK(limA.report.converged);
    CHECK(retract_rank(limA.alpha, interior_samples(B2, 3, 7, 0.4)).k == 2);
}

TEST_CASE("canonical semi-model: hyperbolic automorphism") {
    SemiModel model = canonical_semi_model(aut_hyperbolic(), pt(0.0));
    CHECK(model.retract_dim == 1);
    CHECK(model.kind == ModelKind::Hyperbolic);
    CHECK(model.normal_form_available);
    CHECK_THAT(model.lambda_model, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-9));
    CHECK(model.commutation_residual <= 1e-9);

    // h(f(z)) = 3 h(z) exactly, and h is a positive multiple of the Cayley map
    auto grid = interior_samples(DomainSpec::ball(1), 200, 11, 0.9);
    double worst = 0.0;
    for (const auto& z : grid) {
        Complex hf = model.intertwiner(aut_hyperbolic().eval(z, false))[0];
        Complex hz = model.intertwiner(z)[0];
        worst = std::max(worst, std::abs(hf - 3.0 * hz));
        Complex cayley = kImagUnit * (1.0 + z[0]) / (1.0 - z[0]);
        Complex ratio = hz / cayley;
        CHECK(std::abs(ratio.imag()) < 1e-9);
        CHECK(ratio.real() > 0.0);
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("canonical semi-model: hyperbolic non-automorphism") {
    SemiModel model = canonical_semi_model(half_affine(), pt(0.0));
    CHECK(model.retract_dim == 1);
    CHECK(model.kind == ModelKind::Hyperbolic);
    CHECK_THAT(model.lambda_model, Catch::Matchers::WithinAbs(0.5, 1e-7));
    CHECK(model.commutation_residual <= 1e-6);

    // dual-route oracle: compare with the direct renormalized limit
    auto grid = interior_samples(DomainSpec::ball(1), 24, 13, 0.7);
    Complex ref_ratio;
    bool first = true;
    for (const auto& z : grid) {
        Complex ours = model.intertwiner(z)[0];
        Complex oracle = bgp_limit(half_affine(), 0.5, z[0]);
        Complex ratio = ours / oracle;
        if (first) {
            ref_ratio = ratio;
            first = false;
            CHECK(std::abs(ratio.imag()) < 2e-7 * std::abs(ratio) + 1e-7);
            CHECK(ratio.real() > 0.0);
        } else {
            CHECK(std::abs(ratio - ref_ratio) < 1e-6 * std::abs(ref_ratio) + 1e-7);
        }
    }
}

TEST_CASE("canonical semi-model: parabolic translation") {
    SemiModel model = canonical_semi_model(parabolic_translation(), pt(0.0));
    CHECK(model.retract_dim == 1);
    CHECK(model.kind == ModelKind::ParabolicAbelian);
    CHECK(model.normal_form_available);
    CHECK(model.sign == +1);
    CHECK(model.commutation_residual <= 1e-5);

    // oracle: the map is its own model through the Cayley chart; h must be
    // (Psi + real constant) up to the trivial normalization
    auto grid = interior_samples(DomainSpec::ball(1), 24, 17, 0.7);
    Complex shift;
    bool first = true;
    for (const auto& z : grid) {
        Complex ours = model.intertwiner(z)[0];
        Complex psi = kImagUnit * (1.0 + z[0]) / (1.0 - z[0]);
        Complex d = ours - psi;
        if (first) {
            shift = d;
            first = false;
            CHECK(std::abs(d.imag()) < 1e-5);
        } else {
            CHECK(std::abs(d - shift) < 1e-5);
        }
    }
}

TEST_CASE("canonical semi-model: degenerate and polydisc cases") {
    SemiModel pm = canonical_semi_model(contraction_half(), pt(0.1));
    CHECK(pm.kind == ModelKind::PointModel);
    CHECK(pm.retract_dim == 0);
    CHECK(pm.point_model_value.norm() < 1e-10);
    CHECK_FALSE(pm.warnings.empty());

    SemiModel poly = canonical_semi_model(polydisc_collapse(), pt2(0.0, 0.0));
    CHECK(poly.retract_dim == 1);
    CHECK(poly.kind == ModelKind::Hyperbolic);
    CHECK(poly.normal_form_available);
    CHECK_THAT(poly.lambda_model, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
    CHECK(poly.commutation_residual <= 1e-5);
}

TEST_CASE("canonical semi-model: full-rank ball automorphism") {
    MapExpr aut2 = ball2_hyperbolic_automorphism();
    SemiModel model = canonical_semi_model(aut2, pt2(0.0, 0.0));
    CHECK(model.retract_dim == 2);
    CHECK(model.kind == ModelKind::Hyperbolic);
    CHECK(model.normal_form_available);
    CHECK_THAT(model.lambda_model, Catch::Matchers::WithinAbs(0.5, 1e-9));
    REQUIRE(model.angles.size() == 1);
    CHECK_THAT(model.angles[0], Catch::Matchers::WithinAbs(M_PI / 3.0, 1e-8));
    CHECK(model.commutation_residual <= 1e-8);

    // the intertwiner really lands in H^2 and intertwines with lomo1
    auto grid = interior_samples(DomainSpec::ball(2), 20, 31, 0.6);
    for (const auto& z : grid) {
        CVec w = model.intertwiner(z);
        CHECK(siegel_pairing(w, w).real() > 0.0);
    }
}

TEST_CASE("valiron map") {
    SemiModel model = canonical_semi_model(aut_hyperbolic(), pt(0.0));
    ValironReport val = valiron_map(aut_hyperbolic(), model);
    CHECK(val.residual <= 1e-5);
    CHECK(val.min_im > 0.0);

    Complex t0 = val.theta(pt(0.0))[0];
    Complex t5 = val.theta(pt(0.5))[0];
    CHECK(std::abs(t0.real()) < 1e-9);
    CHECK(t0.imag() > 0.0);
    CHECK(std::abs(t5 / t0 - 3.0) < 1e-9);

    // scaling invariance of the Valiron equation
    auto grid = interior_samples(DomainSpec::ball(1), 30, 19, 0.8);
    double r1 = 0.0, r2 = 0.0;
    for (const auto& z : grid) {
        Complex tz = val.theta(z)[0];
        Complex tfz = val.theta(aut_hyperbolic().eval(z, false))[0];
        r1 = std::max(r1, std::abs(tfz - 3.0 * tz) / std::abs(tz));
        r2 = std::max(r2, std::abs(2.0 * tfz - 3.0 * (2.0 * tz)) / std::abs(2.0 * tz));
    }
    CHECK_THAT(r2, Catch::Matchers::WithinAbs(r1, 1e-12));

    SemiModel par = canonical_semi_model(parabolic_translation(), pt(0.0));
    CHECK_THROWS_AS(valiron_map(parabolic_translation(), par), WrongKind);
}

TEST_CASE("semi-model verification") {
    auto grid = interior_samples(DomainSpec::ball(1), 24, 23, 0.7);

    SemiModel m1 = canonical_semi_model(aut_hyperbolic(), pt(0.0));
    auto v1 = verify_semi_model(aut_hyperbolic(), m1, grid);
    CHECK_FALSE(v1.degenerate);
    CHECK(v1.commutation <= 1e-9);
    REQUIRE_FALSE(v1.pullback.empty());
    CHECK(v1.pullback.back().first == 50);
    for (auto& [m, r] : v1.pullback) CHECK(r <= 1e-9);

    SemiModel m2 = canonical_semi_model(half_affine(), pt(0.0));
    auto v2 = verify_semi_model(half_affine(), m2, grid);
    CHECK(v2.commutation <= 1e-6);
    CHECK(v2.pullback_monotone);
    CHECK(v2.pullback.back().second <= 1e-4);
    CHECK(v2.exhaustion_covered == v2.exhaustion_targets);

    SemiModel m3 = canonical_semi_model(contraction_half(), pt(0.0));
    CHECK(verify_semi_model(contraction_half(), m3, grid).degenerate);
}
