#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "crv/mobility.hpp"

using namespace crv;

namespace {

bool same_positions(const MobilityField& a, const MobilityField& b) {
    if (a.size() != b.size()) return false;
    for (NodeId i = 0; i < static_cast<NodeId>(a.size()); ++i) {
        // Byte-level equality; determinism means identical doubles.
        if (std::memcmp(&a.position(i), &b.position(i), sizeof(Position)) != 0) return false;
    }
    return true;
}

} // namespace

TEST_CASE("zero max speed freezes every node") {
    MobilityModel m{1000.0, 0.0, HeadingPolicy::straight_road_bidirectional, 9};
    MobilityField f(m, 50);
    std::vector<Position> before;
    for (NodeId i = 0; i < 50; ++i) before.push_back(f.position(i));
    for (int s = 0; s < 20; ++s) f.step(0.5);
    for (NodeId i = 0; i < 50; ++i) {
        CHECK(f.position(i).x == before[i].x);
        CHECK(f.position(i).y == before[i].y);
    }
}

TEST_CASE("zero dt leaves positions unchanged") {
    MobilityModel m{1000.0, 2.0, HeadingPolicy::random_waypoint, 5};
    MobilityField f(m, 30);
    std::vector<Position> before;
    for (NodeId i = 0; i < 30; ++i) before.push_back(f.position(i));
    f.step(0.0);
    for (NodeId i = 0; i < 30; ++i) {
        CHECK(f.position(i).x == before[i].x);
        CHECK(f.position(i).y == before[i].y);
    }
}

TEST_CASE("identical seeds give byte-identical trajectories for 200 nodes") {
    for (HeadingPolicy policy :
         {HeadingPolicy::straight_road_bidirectional, HeadingPolicy::random_waypoint}) {
        MobilityModel m{4000.0, 2.0, policy, 42};
        MobilityField a(m, 200);
        MobilityField b(m, 200);
        CHECK(same_positions(a, b));
        for (int s = 0; s < 100; ++s) {
            a.step(0.5);
            b.step(0.5);
        }
        CHECK(same_positions(a, b));
    }
}

TEST_CASE("per-step displacement never exceeds max_speed*dt and stays in area") {
    for (HeadingPolicy policy :
         {HeadingPolicy::straight_road_bidirectional, HeadingPolicy::random_waypoint}) {
        MobilityModel m{500.0, 2.0, policy, 77};
        MobilityField f(m, 40);
        const double dt = 0.5;
        for (int s = 0; s < 200; ++s) {
            std::vector<Position> before;
            for (NodeId i = 0; i < 40; ++i) before.push_back(f.position(i));
            f.step(dt);
            for (NodeId i = 0; i < 40; ++i) {
                // Reflection can fold the path, but the travel budget still caps
                // the displacement from the pre-step point.
                CHECK(distance(before[i], f.position(i)) <= m.max_speed_mps * dt + 1e-9);
                CHECK(f.position(i).x >= 0.0);
                CHECK(f.position(i).x <= m.area_side_m);
                CHECK(f.position(i).y >= 0.0);
                CHECK(f.position(i).y <= m.area_side_m);
            }
        }
    }
}

TEST_CASE("scripted nodes keep their velocity") {
    MobilityModel m{1000.0, 2.0, HeadingPolicy::straight_road_bidirectional, 3};
    MobilityField f(m, 3);
    f.apply_script({{0, {100.0, 100.0}, {1.0, 0.0}}, {1, {500.0, 500.0}, {0.0, 0.0}}});
    f.step(10.0);
    CHECK(f.position(0).x == doctest::Approx(110.0));
    CHECK(f.position(0).y == doctest::Approx(100.0));
    CHECK(f.position(1).x == doctest::Approx(500.0));
    CHECK(f.position(1).y == doctest::Approx(500.0));
}

TEST_CASE("between-step interpolation follows the velocity") {
    MobilityModel m{1000.0, 5.0, HeadingPolicy::straight_road_bidirectional, 3};
    MobilityField f(m, 1);
    f.apply_script({{0, {10.0, 20.0}, {2.0, -1.0}}});
    f.step(1.0);
    Position p = f.position_at(0, 1.25);
    CHECK(p.x == doctest::Approx(12.0 + 0.5));
    CHECK(p.y == doctest::Approx(19.0 - 0.25));
}
