#include <catch2/catch_amalgamated.hpp>

#include <holomodel/chart.hpp>
#include <holomodel/map_expr.hpp>
#include <holomodel/newton.hpp>

#include "test_maps.hpp"

using namespace holomodel;
using namespace testmaps;

TEST_CASE("rational evaluation") {
    auto id = MapExpr::identity(DomainSpec::ball(1));
    CHECK(std::abs(id.eval(pt(0.3))[0] - 0.3) < 1e-16);

    auto f = aut_hyperbolic();
    CHECK(std::abs(f.eval(pt(0.0))[0] - 0.5) < 1e-16);

    auto g = polydisc_collapse();
    CVec w = g.eval(pt2(0.0, 0.4));
    CHECK(std::abs(w[0] - 0.5) < 1e-16);
    CHECK(std::abs(w[1] - 0.2) < 1e-16);

    auto pole = disc_map({1.0}, {-0.5, 1.0}, "1/(z-1/2)");
    CHECK_THROWS_AS(pole.eval(pt(0.5), false), PoleHit);
}

TEST_CASE("analytic jacobians") {
    CHECK(std::abs(squaring().jacobian(pt(0.5))(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(aut_hyperbolic().jacobian(pt(1.0))(0, 0) - 1.0 / 3.0) < 1e-15);

    CMat J = polydisc_collapse().jacobian(pt2(1.0, 0.0));
    CHECK(std::abs(J(0, 0) - 1.0 / 3.0) < 1e-15);
    CHECK(std::abs(J(1, 1) - 0.5) < 1e-15);
    CHECK(std::abs(J(0, 1)) < 1e-15);
    CHECK(std::abs(J(1, 0)) < 1e-15);

    // finite-difference agreement on random interior points
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (const MapExpr& f : {aut_hyperbolic(), squaring(), parabolic_translation()}) {
        for (int i = 0; i < 100; ++i) {
            CVec p = pt(Complex(u(rng), u(rng)));
            auto fn = [&](const CVec& z) { return f.eval(z, false); };
            CMat fd = numeric_jacobian(fn, p, 1e-6);
            CMat an = f.jacobian(p);
            CHECK((fd - an).norm() <= 1e-6 * std::max(1.0, an.norm()));
        }
    }
}

TEST_CASE("composition of evaluators") {
    auto f = aut_hyperbolic();
    auto idf = compose_maps(MapExpr::identity(f.domain()), f);
    auto grid = interior_samples(f.domain(), 25, 1);
    for (const auto& z : grid) CHECK((idf(z) - f.eval(z)).norm() < 1e-16);

    auto ff = compose_maps(f, f);
    for (const auto& z : grid) {
        Orbit orb = iterate(f, 2, z);
        CHECK((ff(z) - orb.points[2]).norm() < 1e-15);
    }

    // associativity
    auto h = half_affine();
    auto g = parabolic_translation();
    auto left = compose_maps(compose_maps(to_eval(h), to_eval(g)), to_eval(f));
    auto right = compose_maps(to_eval(h), compose_maps(to_eval(g), to_eval(f)));
    for (const auto& z : grid) CHECK((left(z) - right(z)).norm() < 1e-13);

    auto doubling = disc_map({0.0, 2.0}, {1.0}, "2z");
    CHECK_THROWS_AS(compose_maps(f, doubling), DomainMismatch);
}

TEST_CASE("symbolic composition agrees with pointwise composition") {
    auto f = aut_hyperbolic();
    auto g = half_affine();
    MapExpr gf = compose_symbolic(g, f);
    auto grid = interior_samples(f.domain(), 40, 2);
    for (const auto& z : grid)
        CHECK(std::abs(gf.eval(z, false)[0] - g.eval(f.eval(z))[0]) < 1e-14);

    // conjugating (z+1)/2 by the Cayley transform gives exactly 2Z + i
    SiegelChart chart(DomainSpec::ball(1), BoundaryPoint::of(pt(1.0)));
    MapExpr F = chart.conjugate(half_affine());
    for (const auto& z : grid) {
        CVec Z = chart.to_chart(z);
        CHECK(std::abs(F.eval(Z, false)[0] - (2.0 * Z[0] + kImagUnit)) < 1e-12 * std::abs(Z[0]));
    }

    // conjugating z^2 gives the Joukowski-type map (V^2 - 1) / (2V)
    MapExpr Fsq = chart.conjugate(squaring());
    for (const auto& z : grid) {
        CVec Z = chart.to_chart(z);
        Complex expect = (Z[0] * Z[0] - 1.0) / (2.0 * Z[0]);
        CHECK(std::abs(Fsq.eval(Z, false)[0] - expect) < 1e-11 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("siegel frames are exact automorphisms of the chart") {
    DomainSpec H2 = DomainSpec::siegel(2);
    auto pts = interior_samples(H2, 20, 9);
    CVec base = pt2(kImagUnit, 0.0);
    for (const auto& V : pts) {
        SiegelFrame g = SiegelFrame::at(V);
        CHECK((g.apply(base) - V).norm() < 1e-13);
        for (const auto& P : pts) {
            CHECK((g.apply_inverse(g.apply(P)) - P).norm() < 1e-12);
            for (const auto& Q : pts) {
                double before = siegel_distance(P, Q);
                double after = siegel_distance(g.apply(P), g.apply(Q));
                CHECK_THAT(after, Catch::Matchers::WithinAbs(before, 1e-10));
            }
        }
    }
}

TEST_CASE("iterate produces orbits with the defining property") {
    Orbit o1 = iterate(contraction_half(), 3, pt(0.8));
    REQUIRE(o1.length() == 4);
    CHECK(std::abs(o1.points[1][0] - 0.4) < 1e-16);
    CHECK(std::abs(o1.points[3][0] - 0.1) < 1e-16);

    Orbit o2 = iterate(aut_hyperbolic(), 2, pt(0.0));
    CHECK(std::abs(o2.points[1][0] - 0.5) < 1e-16);
    CHECK(std::abs(o2.points[2][0] - 0.8) < 1e-15);

    Orbit o3 = iterate(half_affine(), 3, pt(0.0));
    CHECK(std::abs(o3.points[3][0] - 0.875) < 1e-16);

    // re-evaluation invariant
    for (const MapExpr& f : {aut_hyperbolic(), half_affine(), parabolic_translation()}) {
        Orbit orb = iterate(f, 40, pt(Complex(0.1, 0.2)));
        for (int n = 0; n + 1 < orb.length(); ++n)
            CHECK((f.eval(orb.points[n], false) - orb.points[n + 1]).norm() < 1e-12);
    }

    auto doubling = disc_map({0.0, 2.0}, {1.0}, "2z");
    CHECK_THROWS_AS(iterate(doubling, 4, pt(0.6)), OrbitEscapedDomain);
}

TEST_CASE("self-map validation") {
    auto rep = validate_self_map(contraction_half(), 1000, 0);
    CHECK(rep.passed);
    CHECK_THAT(rep.max_attained, Catch::Matchers::WithinAbs(0.49995, 1e-4));

    auto doubling = disc_map({0.0, 2.0}, {1.0}, "2z");
    auto bad = validate_self_map(doubling, 200, 0);
    CHECK_FALSE(bad.passed);
    REQUIRE(bad.witness.has_value());
    CHECK(std::abs(doubling.eval(*bad.witness, false)[0]) >= 1.0);

    CHECK(validate_self_map(aut_hyperbolic(), 1000, 0).passed);
    CHECK(validate_self_map(polydisc_collapse(), 500, 0).passed);
}

TEST_CASE("map JSON round trip is bit-exact") {
    for (const MapExpr& f : {aut_hyperbolic(), parabolic_translation(), polydisc_collapse()}) {
        nlohmann::json j = map_to_json(f);
        std::string s1 = j.dump();
        MapExpr g = map_from_json(nlohmann::json::parse(s1));
        std::string s2 = map_to_json(g).dump();
        CHECK(s1 == s2);
        CHECK(g.domain() == f.domain());
        auto grid = interior_samples(f.domain(), 10, 4);
        for (const auto& z : grid) CHECK((g.eval(z, false) - f.eval(z, false)).norm() == 0.0);
    }

    nlohmann::json broken = {{"domain", {{"kind", "ball"}, {"dim", 1}}}};
    CHECK_THROWS_WITH(map_from_json(broken), Catch::Matchers::ContainsSubstring("components"));
    nlohmann::json badkind = {{"domain", {{"kind", "torus"}, {"dim", 1}}}, {"components", nlohmann::json::array()}};
    CHECK_THROWS_WITH(map_from_json(badkind), Catch::Matchers::ContainsSubstring("kind"));
}
