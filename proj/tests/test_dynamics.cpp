#include <catch2/catch_amalgamated.hpp>

#include <holomodel/dynamics.hpp>

#include "test_maps.hpp"

using namespace holomodel;
using namespace testmaps;

namespace {
const double kLog3 = std::log(3.0);
const double kAtanhHalf = std::atanh(0.5);
const double kAtanhThird = std::atanh(1.0 / 3.0);

// rotation conjugated to fix 0.3: m_a o (iz) o m_a with a = 0.3
MapExpr rotation_fixing(Complex a) {
    MapExpr m = disc_map({a, -1.0}, {1.0, -std::conj(a)}, "mobius");
    return compose_symbolic(m, compose_symbolic(rotation_i(), m)).with_label("rot@0.3");
}
} // namespace

TEST_CASE("denjoy-wolff point") {
    auto dw1 = denjoy_wolff(contraction_half());
    CHECK(dw1.interior);
    CHECK(dw1.fixed_point.norm() < 1e-12);

    auto dw2 = denjoy_wolff(aut_hyperbolic());
    CHECK_FALSE(dw2.interior);
    CHECK(std::abs(dw2.dw.direction[0] - 1.0) < 1e-10);

    auto dw3 = denjoy_wolff(half_affine());
    CHECK_FALSE(dw3.interior);
    CHECK(std::abs(dw3.dw.direction[0] - 1.0) < 1e-10);

    // parabolic fixed points are double roots of f(z) - z; the polish is
    // noise-floor limited around sqrt(eps)
    auto dw4 = denjoy_wolff(parabolic_translation());
    CHECK_FALSE(dw4.interior);
    CHECK(std::abs(dw4.dw.direction[0] - 1.0) < 1e-6);

    auto dw5 = denjoy_wolff(squaring());
    CHECK(dw5.interior);
    CHECK(dw5.fixed_point.norm() < 1e-12);

    // rotation-type elliptic: iteration never settles, Newton fallback finds
    // the fixed point
    DynamicsOptions fast;
    fast.dw_max_iter = 20000;
    auto dw6 = denjoy_wolff(rotation_fixing(0.3), fast);
    CHECK(dw6.interior);
    CHECK(std::abs(dw6.fixed_point[0] - 0.3) < 1e-9);
}

TEST_CASE("boundary dilation radial estimates") {
    BoundaryPoint one = BoundaryPoint::of(pt(1.0));
    BoundaryPoint minus = BoundaryPoint::of(pt(-1.0));

    // oracle: f'(zeta) by the quotient rule, frozen by hand
    CHECK_THAT(boundary_dilation(aut_hyperbolic(), one).lambda,
               Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
    CHECK_THAT(boundary_dilation(aut_hyperbolic(), minus).lambda,
               Catch::Matchers::WithinAbs(3.0, 1e-6));
    CHECK_THAT(boundary_dilation(half_affine(), one).lambda,
               Catch::Matchers::WithinAbs(0.5, 1e-6));
    CHECK_THAT(boundary_dilation(squaring(), one).lambda,
               Catch::Matchers::WithinAbs(2.0, 1e-6));
    CHECK_THAT(boundary_dilation(blaschke_repelling(), one).lambda,
               Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-6));

    BoundaryPoint i_pt = BoundaryPoint::of(pt(kImagUnit));
    CHECK_THROWS_AS(boundary_dilation(aut_hyperbolic(), i_pt), NotAFixedDirection);
}

TEST_CASE("forward steps") {
    auto s_aut = forward_step(aut_hyperbolic(), pt(0.0), 1, 100);
    CHECK(s_aut.converged);
    CHECK_THAT(s_aut.value, Catch::Matchers::WithinAbs(kAtanhHalf, 1e-12));

    auto s_contr = forward_step(contraction_half(), pt(0.0), 5, 100);
    CHECK(s_contr.value == 0.0);

    // oracle: the orbit of (z+1)/2 is 1 - 2^{-n}; the step ratio in
    // deficiency form is 1/(3 - 2^{-n}) -> 1/3
    double oracle = std::atanh(1.0 / (3.0 - std::pow(2.0, -55)));
    auto s_half = forward_step(half_affine(), pt(0.0), 1, 100);
    CHECK(s_half.converged);
    CHECK_THAT(s_half.value, Catch::Matchers::WithinAbs(oracle, 1e-6));
    CHECK_THAT(s_half.value, Catch::Matchers::WithinAbs(kAtanhThird, 1e-6));

    // monotone non-increasing in n up to the plateau (the final entry is the
    // detected stall and may carry boundary-rounding noise)
    for (const MapExpr& f : {aut_hyperbolic(), half_affine(), parabolic_translation()}) {
        for (int m : {1, 2, 5}) {
            auto est = forward_step(f, pt(Complex(0.2, -0.1)), m, 60);
            for (std::size_t i = 0; i + 2 < est.sequence.size(); ++i)
                CHECK(est.sequence[i + 1] <= est.sequence[i] + 1e-12);
        }
    }

    // subadditivity, evaluated at a common orbit index inside the
    // well-conditioned depth range
    for (const MapExpr& f : {aut_hyperbolic(), half_affine(), parabolic_translation()}) {
        const long nbar = 18;
        Orbit orb = iterate(f, nbar + 6, pt(0.1));
        auto d = [&](int m) {
            return kobayashi_distance(f.domain(), orb.points[nbar], orb.points[nbar + m]);
        };
        for (auto [m1, m2] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 3}}) {
            CHECK(d(m1 + m2) <= d(m1) + d(m2) + 1e-9);
        }
    }
}

TEST_CASE("divergence rate") {
    CHECK(divergence_rate(contraction_half(), pt(0.0)).c < 1e-9);
    CHECK_THAT(divergence_rate(aut_hyperbolic(), pt(0.0)).c,
               Catch::Matchers::WithinAbs(kLog3, 1e-3));
    CHECK(divergence_rate(parabolic_translation(), pt(0.0)).c <= 1e-2);

    // the inf form is an upper bound for the refined value
    auto r = divergence_rate(half_affine(), pt(0.0));
    CHECK(r.c <= r.c_inf_form + 1e-15);
    CHECK_THAT(r.c, Catch::Matchers::WithinAbs(std::log(2.0), 1e-3));

    // base-point independence
    for (const MapExpr& f : {aut_hyperbolic(), half_affine(), parabolic_translation()}) {
        double c0 = divergence_rate(f, pt(0.0)).c;
        double c1 = divergence_rate(f, pt(Complex(0.3, 0.2))).c;
        CHECK(std::abs(c0 - c1) <= 2e-3);
    }
}

TEST_CASE("rate-step identity") {
    // |c(f) - min_m (scaled s_m / m)| <= 1e-3
    for (const MapExpr& f : {aut_hyperbolic(), half_affine()}) {
        double c = divergence_rate(f, pt(0.0)).c;
        double best = std::numeric_limits<double>::infinity();
        for (int m = 1; m <= 8; ++m) {
            double sm = forward_step(f, pt(0.0), m, 120).value;
            best = std::min(best, kRateLengthScale * sm / m);
        }
        CHECK(std::abs(c - best) <= 1e-3);
    }
}

TEST_CASE("classification reports") {
    auto rep1 = classify_map(aut_hyperbolic());
    CHECK(rep1.kind == MapClass::Hyperbolic);
    REQUIRE(rep1.dw.has_value());
    CHECK(std::abs(rep1.dw->direction[0] - 1.0) < 1e-10);
    REQUIRE(rep1.dilation.has_value());
    CHECK_THAT(*rep1.dilation, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
    CHECK_THAT(rep1.rate.c, Catch::Matchers::WithinAbs(kLog3, 1e-3));
    CHECK(rep1.nonzero_step);
    CHECK(std::abs(rep1.rate.c + std::log(*rep1.dilation)) <= 1e-3);
    CHECK(rep1.warnings.empty());

    auto rep2 = classify_map(parabolic_translation());
    CHECK(rep2.kind == MapClass::Parabolic);
    REQUIRE(rep2.dilation.has_value());
    CHECK_THAT(*rep2.dilation, Catch::Matchers::WithinAbs(1.0, 1e-4));
    CHECK(rep2.rate.c <= 1e-2);
    CHECK(rep2.nonzero_step);

    auto rep3 = classify_map(contraction_half());
    CHECK(rep3.kind == MapClass::Elliptic);
    REQUIRE(rep3.interior_fixed.has_value());
    CHECK(rep3.interior_fixed->norm() < 1e-12);
    CHECK(rep3.rate.c < 1e-6);

    auto rep4 = classify_map(polydisc_collapse());
    CHECK(rep4.kind == MapClass::Hyperbolic);
    REQUIRE(rep4.dw.has_value());
    CHECK(std::abs(rep4.dw->direction[0] - 1.0) < 1e-9);
    CHECK(std::abs(rep4.dw->direction[1]) < 1e-6);
    CHECK_THAT(*rep4.dilation, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
}

TEST_CASE("distance contraction under validated self-maps") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (const MapExpr& f :
         {aut_hyperbolic(), half_affine(), parabolic_translation(), squaring(), blaschke_repelling()}) {
        REQUIRE(validate_self_map(f, 400, 1).passed);
        for (int i = 0; i < 100; ++i) {
            CVec a = pt(Complex(u(rng), u(rng)) / 1.5);
            CVec b = pt(Complex(u(rng), u(rng)) / 1.5);
            double before = kobayashi_distance(f.domain(), a, b);
            double after = kobayashi_distance(f.domain(), f.eval(a), f.eval(b));
            CHECK(after <= before + 1e-9);
        }
    }
}
