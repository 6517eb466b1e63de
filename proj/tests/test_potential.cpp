#include <catch2/catch.hpp>

#include "glwave/potential.hpp"

using namespace glwave;

TEST_CASE("scalar quartic evaluations") {
    auto m = PotentialModel::quartic_scalar();
    auto at1 = eval_potential(m, Vec{1.0});
    CHECK(at1.F == 0.0);
    CHECK(at1.f[0] == 0.0);
    auto at0 = eval_potential(m, Vec{0.0});
    CHECK(at0.F == Approx(0.25));
    CHECK(at0.f[0] == 0.0);
    CHECK_THROWS_AS(eval_potential(m, Vec{std::numeric_limits<double>::quiet_NaN()}), GlwError);
}

TEST_CASE("vector quartic evaluations") {
    auto m = PotentialModel::quartic_vector();
    auto on_circle = eval_potential(m, Vec{0.0, 1.0});
    CHECK(on_circle.F == 0.0);
    CHECK(on_circle.f[0] == 0.0);
    CHECK(on_circle.f[1] == 0.0);
}

TEST_CASE("structural assumptions hold for the quartic models") {
    auto sc = validate_potential(PotentialModel::quartic_scalar());
    CHECK(sc.vacuum_residual == 0.0);
    CHECK(sc.lower_c > 0.0);
    CHECK(sc.gradient_mismatch < 1e-8);

    auto vc = validate_potential(PotentialModel::quartic_vector());
    CHECK(vc.vacuum_residual < 1e-14);
    CHECK(vc.lower_c > 0.0);
    CHECK(vc.upper_C < std::numeric_limits<double>::infinity());
    CHECK(vc.far_floor > 0.0);
    CHECK(vc.gradient_mismatch < 1e-7);
}

TEST_CASE("growth guard clamps far inputs and records activation") {
    auto m = PotentialModel::quartic_scalar();
    m.guard_activated = false;
    auto e = eval_potential(m, Vec{50.0});
    CHECK(m.guard_activated);
    CHECK(e.F == Approx(m.F1(10.0)));
    m.guard_activated = false;
    eval_potential(m, Vec{0.5});
    CHECK_FALSE(m.guard_activated);
}
