#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "crv/kinematics.hpp"
#include "crv/rng.hpp"

using namespace crv;

TEST_CASE("stationary node has zero speed") {
    TimedFix fix{0.0, 0.9, 0.1, {5.0, 5.0}, {5.0, 5.0}};
    CHECK(estimate_speed(fix) == 0.0);
}

TEST_CASE("3-4-5 displacement over one second") {
    TimedFix fix{0.0, 0.9, 0.1, {0.0, 0.0}, {3.0, 4.0}};
    CHECK(estimate_speed(fix) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("axis-aligned displacement") {
    TimedFix fix{1.0, 4.0, 0.0, {10.0, 10.0}, {10.0, 16.0}};
    CHECK(estimate_speed(fix) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("non-positive interval rejected") {
    TimedFix fix{2.0, 1.0, 0.5, {0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(estimate_speed(fix), InvalidInput);
    TimedFix exact{1.0, 1.0, 0.0, {0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(estimate_speed(exact), InvalidInput);
}

TEST_CASE("speed is translation invariant and degree-1 in spatial scale") {
    Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        TimedFix fix;
        fix.receive_time_s = rng.uniform(0.0, 10.0);
        fix.send_time_s = fix.receive_time_s + rng.uniform(0.01, 2.0);
        fix.transit_time_s = rng.uniform(0.0, 0.5);
        fix.receive_pos = {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
        fix.send_pos = {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
        double s = estimate_speed(fix);

        Vec2 shift{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};
        TimedFix moved = fix;
        moved.receive_pos = fix.receive_pos + shift;
        moved.send_pos = fix.send_pos + shift;
        CHECK(estimate_speed(moved) == doctest::Approx(s).epsilon(1e-9));

        double k = rng.uniform(0.1, 8.0);
        TimedFix scaled = fix;
        scaled.receive_pos = fix.receive_pos * k;
        scaled.send_pos = fix.send_pos * k;
        CHECK(estimate_speed(scaled) == doctest::Approx(k * s).epsilon(1e-9));
    }
}

TEST_CASE("heading angle canonical directions") {
    Position o{0.0, 0.0};
    auto same = heading_angle(o, {2.0, 0.0}, {5.0, 5.0}, {9.0, 5.0});
    REQUIRE(same.has_value());
    CHECK(*same == doctest::Approx(0.0).epsilon(1e-12));

    auto opposite = heading_angle(o, {2.0, 0.0}, {5.0, 5.0}, {1.0, 5.0});
    REQUIRE(opposite.has_value());
    CHECK(*opposite == doctest::Approx(std::numbers::pi).epsilon(1e-12));

    auto orthogonal = heading_angle(o, {2.0, 0.0}, {5.0, 5.0}, {5.0, 9.0});
    REQUIRE(orthogonal.has_value());
    CHECK(*orthogonal == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("degenerate movement vectors have no angle") {
    Position o{1.0, 1.0};
    CHECK_FALSE(heading_angle(o, o, {0.0, 0.0}, {1.0, 0.0}).has_value());
    CHECK_FALSE(heading_angle({0.0, 0.0}, {1.0, 0.0}, o, o).has_value());
}

TEST_CASE("heading angle stays in range and ignores uniform scaling") {
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) {
        Position nr{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        Position ns{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        Position dr{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        Position ds{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
        auto theta = heading_angle(nr, ns, dr, ds);
        if (!theta) continue;
        CHECK(*theta >= 0.0);
        CHECK(*theta <= std::numbers::pi);

        double k = rng.uniform(0.05, 20.0);
        auto scaled = heading_angle(nr * k, ns * k, dr * k, ds * k);
        REQUIRE(scaled.has_value());
        CHECK(*scaled == doctest::Approx(*theta).epsilon(1e-7));
    }
}

TEST_CASE("displacement") {
    CHECK(displacement(123.0, 0.0) == 0.0);
    CHECK(displacement(100.0, std::numbers::pi / 2) ==
          doctest::Approx(50.0 * std::numbers::pi).epsilon(1e-12));
    CHECK(displacement(0.0, 2.0) == 0.0);
    CHECK_THROWS_AS(displacement(-1.0, 1.0), InvalidInput);
}
