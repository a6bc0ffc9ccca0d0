#pragma once

#include <optional>

#include "crv/errors.hpp"
#include "crv/geom.hpp"

namespace crv {

/// Receive/send timestamps and coordinates of one control-message handshake.
/// The speed of the node during that exchange is displacement over
/// (send_time + transit_time) - receive_time.
struct TimedFix {
    double receive_time_s = 0.0;  // T1
    double send_time_s = 0.0;     // T2
    double transit_time_s = 0.0;  // transmission time of the reply
    Position receive_pos;
    Position send_pos;
};

/// Euclidean displacement between the fix coordinates divided by the exchange
/// interval. Throws InvalidInput when the interval is not strictly positive.
double estimate_speed(const TimedFix& fix);

/// Angle between the movement vector of a candidate relay and the movement
/// vector of the destination, in [0, pi]. Returns nullopt when either vector
/// has zero length; callers substitute the configured angle floor.
std::optional<double> heading_angle(const Position& neighbor_recv, const Position& neighbor_send,
                                    const Position& dest_recv, const Position& dest_send);

/// Relative displacement between two neighboring nodes: distance * angle.
double displacement(double distance_m, double theta_rad);

} // namespace crv
