#include "crv/kinematics.hpp"

#include <algorithm>
#include <cmath>

namespace crv {

double estimate_speed(const TimedFix& fix) {
    double interval = (fix.send_time_s + fix.transit_time_s) - fix.receive_time_s;
    if (!(interval > 0.0) || !std::isfinite(interval)) {
        throw InvalidInput("fix interval (T2 + transit) - T1 must be positive");
    }
    // Distance between the receive-time and send-time coordinates. The
    // coordinate pairing is per point, not per axis.
    return distance(fix.receive_pos, fix.send_pos) / interval;
}

std::optional<double> heading_angle(const Position& neighbor_recv, const Position& neighbor_send,
                                    const Position& dest_recv, const Position& dest_send) {
    Vec2 v1 = neighbor_send - neighbor_recv;
    Vec2 v2 = dest_send - dest_recv;
    double n1 = v1.norm();
    double n2 = v2.norm();
    if (n1 == 0.0 || n2 == 0.0) {
        return std::nullopt;
    }
    double c = v1.dot(v2) / (n1 * n2);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

double displacement(double distance_m, double theta_rad) {
    if (distance_m < 0.0 || !std::isfinite(distance_m)) {
        throw InvalidInput("displacement requires a non-negative distance");
    }
    return distance_m * theta_rad;
}

} // namespace crv
