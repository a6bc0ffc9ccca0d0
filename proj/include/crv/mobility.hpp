#pragma once

#include <cstdint>
#include <vector>

#include "crv/geom.hpp"
#include "crv/rng.hpp"

namespace crv {

using NodeId = std::uint32_t;

enum class HeadingPolicy {
    straight_road_bidirectional, // lanes along +/-x with small lateral jitter
    random_waypoint,
};

struct MobilityModel {
    double area_side_m = 4000.0;
    double max_speed_mps = 2.0;
    HeadingPolicy policy = HeadingPolicy::straight_road_bidirectional;
    std::uint64_t rng_seed = 1;
};

/// Fixed placement/velocity override for scripted scenarios.
struct ScriptedNode {
    NodeId id = 0;
    Position pos;
    Vec2 vel;
};

/// Owns the kinematic state of every vehicle. Positions advance in discrete
/// steps; between steps they are interpolated linearly so control handshakes
/// observe continuous motion.
class MobilityField {
  public:
    MobilityField(const MobilityModel& model, int node_count);

    /// Pin selected nodes to scripted positions/velocities. Scripted nodes
    /// keep their velocity forever (no re-steering), reflecting at the
    /// area boundary like everyone else.
    void apply_script(const std::vector<ScriptedNode>& script);

    /// Advance every node by dt seconds (dt >= 0). Per-node displacement is
    /// capped at max_speed * dt; nodes reflect at the area boundary.
    void step(double dt);

    int size() const { return static_cast<int>(pos_.size()); }
    double step_time() const { return time_; }

    const Position& position(NodeId id) const { return pos_[id]; }
    const Vec2& velocity(NodeId id) const { return vel_[id]; }

    /// Position extrapolated from the last step by the current velocity,
    /// clamped to the area. t must be >= the last step time.
    Position position_at(NodeId id, double t) const;

  private:
    void steer(NodeId id);
    void reflect(NodeId id);

    MobilityModel model_;
    Rng rng_;
    double time_ = 0.0;
    std::vector<Position> pos_;
    std::vector<Vec2> vel_;
    std::vector<Position> target_;  // random-waypoint destinations
    std::vector<double> speed_;     // per-node cruise speed
    std::vector<bool> scripted_;
};

} // namespace crv
