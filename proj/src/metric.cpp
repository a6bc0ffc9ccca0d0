#include "crv/metric.hpp"

#include <cmath>

namespace crv {

double queuing_delay(double packet_bits, int neighbor_count, double data_rate_bps) {
    if (!(data_rate_bps > 0.0)) throw InvalidInput("data rate must be positive");
    if (neighbor_count < 0) throw InvalidInput("neighbor count must be non-negative");
    if (!(packet_bits >= 0.0) || !std::isfinite(packet_bits)) {
        throw InvalidInput("packet size must be non-negative and finite");
    }
    return packet_bits * static_cast<double>(neighbor_count) / data_rate_bps;
}

double backoff_delay(double collision_prob, int neighbor_count, double window_s) {
    if (!(collision_prob > 0.0) || !(collision_prob < 1.0)) {
        throw InvalidInput("collision probability must lie in (0, 1)");
    }
    if (!(window_s > 0.0)) throw InvalidInput("contention window must be positive");
    if (neighbor_count <= 1) {
        throw DegenerateContention("back-off undefined for fewer than two stations");
    }
    double q = 1.0 - collision_prob;
    return window_s / (q * (1.0 - std::pow(q, neighbor_count - 1)));
}

double backoff_delay_or_window(double collision_prob, int neighbor_count, double window_s) {
    if (neighbor_count <= 1) {
        if (!(window_s > 0.0)) throw InvalidInput("contention window must be positive");
        return window_s; // lone transmitter still waits its own back-off
    }
    return backoff_delay(collision_prob, neighbor_count, window_s);
}

double transmit_weight(double range_m, double tau_m, double path_delay_s, double speed_mps) {
    if (!(range_m > 0.0)) throw InvalidInput("transmission range must be positive");
    if (!(tau_m > 0.0) || !(path_delay_s > 0.0) || !(speed_mps > 0.0)) {
        throw InvariantViolation("transmit_weight fed an unfloored zero denominator");
    }
    return range_m / (tau_m * path_delay_s * speed_mps);
}

double reliability(int report_count) {
    if (report_count < 0) throw InvalidInput("report count must be non-negative");
    return std::exp(static_cast<double>(report_count));
}

ReliabilityFactor ReliabilityFactor::from_report_count(int reports) {
    ReliabilityFactor rf;
    rf.infinite_ = false;
    rf.value_ = reliability(reports);
    return rf;
}

Nhdf link_nhdf(double xi, double link_delay_s, int common_channels,
               const ReliabilityFactor& rf) {
    if (!(link_delay_s > 0.0)) throw InvalidInput("link delay must be positive");
    if (common_channels < 0) throw InvalidInput("common channel count must be non-negative");
    if (rf.is_infinite()) return Nhdf::excluded_link();
    if (common_channels == 0) return Nhdf::excluded_link();
    WideReal base(xi / link_delay_s);
    return Nhdf::of(base.pow_int(common_channels) / WideReal(rf.value()));
}

WideReal path_weight(std::span<const Nhdf> links) {
    WideReal total = WideReal::zero();
    for (const Nhdf& n : links) {
        if (n.excluded()) return WideReal::zero();
        total += n.value();
    }
    return total;
}

} // namespace crv
