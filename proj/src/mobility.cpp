#include "crv/mobility.hpp"

#include <algorithm>
#include <cmath>

#include "crv/errors.hpp"

namespace crv {

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

} // namespace

MobilityField::MobilityField(const MobilityModel& model, int node_count)
    : model_(model), rng_(mix_seed(model.rng_seed, 0x6d6f62696cULL)) {
    if (node_count < 0) throw InvalidInput("node_count must be non-negative");
    if (model_.area_side_m <= 0.0) throw InvalidInput("area side must be positive");
    if (model_.max_speed_mps < 0.0) throw InvalidInput("max speed must be non-negative");

    pos_.resize(node_count);
    vel_.resize(node_count);
    target_.resize(node_count);
    speed_.resize(node_count);
    scripted_.assign(node_count, false);

    for (int i = 0; i < node_count; ++i) {
        pos_[i] = {rng_.uniform(0.0, model_.area_side_m), rng_.uniform(0.0, model_.area_side_m)};
        if (model_.policy == HeadingPolicy::straight_road_bidirectional) {
            speed_[i] = rng_.uniform(0.25, 1.0) * model_.max_speed_mps;
            double dir = rng_.coin() ? 1.0 : -1.0;
            vel_[i] = {dir * speed_[i], 0.0};
        } else {
            speed_[i] = rng_.uniform(0.1, 1.0) * model_.max_speed_mps;
            target_[i] = {rng_.uniform(0.0, model_.area_side_m),
                          rng_.uniform(0.0, model_.area_side_m)};
            steer(i);
        }
    }
}

void MobilityField::apply_script(const std::vector<ScriptedNode>& script) {
    for (const auto& s : script) {
        if (s.id >= pos_.size()) throw InvalidInput("scripted node id out of range");
        pos_[s.id] = {clampd(s.pos.x, 0.0, model_.area_side_m),
                      clampd(s.pos.y, 0.0, model_.area_side_m)};
        vel_[s.id] = s.vel;
        scripted_[s.id] = true;
    }
}

void MobilityField::steer(NodeId id) {
    Vec2 to_target = target_[id] - pos_[id];
    double d = to_target.norm();
    if (d < 1e-9) {
        vel_[id] = {0.0, 0.0};
        return;
    }
    vel_[id] = to_target * (speed_[id] / d);
}

void MobilityField::reflect(NodeId id) {
    double side = model_.area_side_m;
    if (pos_[id].x < 0.0) {
        pos_[id].x = -pos_[id].x;
        vel_[id].x = -vel_[id].x;
    } else if (pos_[id].x > side) {
        pos_[id].x = 2.0 * side - pos_[id].x;
        vel_[id].x = -vel_[id].x;
    }
    if (pos_[id].y < 0.0) {
        pos_[id].y = -pos_[id].y;
        vel_[id].y = -vel_[id].y;
    } else if (pos_[id].y > side) {
        pos_[id].y = 2.0 * side - pos_[id].y;
        vel_[id].y = -vel_[id].y;
    }
    pos_[id].x = clampd(pos_[id].x, 0.0, side);
    pos_[id].y = clampd(pos_[id].y, 0.0, side);
}

void MobilityField::step(double dt) {
    if (dt < 0.0) throw InvalidInput("mobility step requires dt >= 0");
    const double max_move = model_.max_speed_mps * dt;
    for (NodeId i = 0; i < pos_.size(); ++i) {
        if (!scripted_[i]) {
            if (model_.policy == HeadingPolicy::straight_road_bidirectional) {
                // Small per-step lateral jitter; the speed cap below keeps the
                // total displacement within max_speed * dt.
                double jitter = 0.1 * model_.max_speed_mps * rng_.uniform(-1.0, 1.0);
                double dir = vel_[i].x >= 0.0 ? 1.0 : -1.0;
                vel_[i] = {dir * speed_[i], jitter};
            } else {
                steer(i);
            }
        }
        Vec2 move = vel_[i] * dt;
        double len = move.norm();
        if (len > max_move && len > 0.0 && !scripted_[i]) {
            move = move * (max_move / len);
        }
        if (model_.policy == HeadingPolicy::random_waypoint && !scripted_[i]) {
            double to_target = (target_[i] - pos_[i]).norm();
            if (len >= to_target) {
                pos_[i] = target_[i];
                target_[i] = {rng_.uniform(0.0, model_.area_side_m),
                              rng_.uniform(0.0, model_.area_side_m)};
                steer(i);
            } else {
                pos_[i] = pos_[i] + move;
            }
        } else {
            pos_[i] = pos_[i] + move;
        }
        reflect(i);
    }
    time_ += dt;
}

Position MobilityField::position_at(NodeId id, double t) const {
    double dt = t - time_;
    if (dt <= 0.0) return pos_[id];
    Position p = pos_[id] + vel_[id] * dt;
    p.x = clampd(p.x, 0.0, model_.area_side_m);
    p.y = clampd(p.y, 0.0, model_.area_side_m);
    return p;
}

} // namespace crv
