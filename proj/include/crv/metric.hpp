#pragma once

#include <span>
#include <vector>

#include "crv/errors.hpp"
#include "crv/wide_real.hpp"

namespace crv {

/// The three delay components of one link. The total is never stored; it is
/// always recomputed as the sum.
struct LinkDelays {
    double queuing_s = 0.0;
    double backoff_s = 0.0;
    double switching_s = 0.0;

    double total_s() const { return queuing_s + backoff_s + switching_s; }
};

/// Substitution floors applied before mobility quantities feed the
/// transmitting weight. They keep near-stationary nodes heavily weighted
/// instead of dividing by zero.
struct MetricFloors {
    double theta_rad = 1e-3;  // substituted when a movement vector is degenerate
    double speed_mps = 0.01;  // lower bound on the estimated speed
    double tau_m = 1e-3;      // lower bound on the relative displacement
};

/// Queue wait at a node: packet_bits * neighbor_count / data_rate.
double queuing_delay(double packet_bits, int neighbor_count, double data_rate_bps);

/// Contention back-off: window / ((1-bc) * (1 - (1-bc)^(V-1))).
/// Throws DegenerateContention when neighbor_count <= 1; callers that want
/// the lone-transmitter substitution use backoff_delay_or_window.
double backoff_delay(double collision_prob, int neighbor_count, double window_s);

/// backoff_delay with the degenerate case mapped to one contention window.
double backoff_delay_or_window(double collision_prob, int neighbor_count, double window_s);

/// Transmitting weight: range / (displacement * cumulative_path_delay * speed).
/// All denominator factors must already be floored strictly positive.
double transmit_weight(double range_m, double tau_m, double path_delay_s, double speed_mps);

/// Reliability factor as a value: e^reports, or the distinguished infinite
/// marker once a node has been voted malicious. Never a floating-point inf.
class ReliabilityFactor {
  public:
    ReliabilityFactor() : infinite_(false), value_(1.0) {}

    static ReliabilityFactor from_report_count(int reports);
    static ReliabilityFactor infinite() {
        ReliabilityFactor rf;
        rf.infinite_ = true;
        rf.value_ = 0.0;
        return rf;
    }

    bool is_infinite() const { return infinite_; }
    /// Finite value; only meaningful when !is_infinite().
    double value() const { return value_; }

  private:
    bool infinite_;
    double value_;
};

/// e^reports; reports must be >= 0.
double reliability(int report_count);

/// Per-link next-hop weight. Zero exactly when the link is excluded: the
/// neighbor's reliability factor is infinite, or the endpoints share no idle
/// channel.
class Nhdf {
  public:
    Nhdf() : value_(WideReal::zero()), excluded_(true) {}

    static Nhdf excluded_link() { return Nhdf(); }
    static Nhdf of(WideReal v) {
        Nhdf n;
        n.value_ = v;
        n.excluded_ = false;
        return n;
    }

    const WideReal& value() const { return value_; }
    bool excluded() const { return excluded_; }

  private:
    WideReal value_;
    bool excluded_;
};

/// (xi / delta_E)^Cn / RF, with the exclusion rules above.
Nhdf link_nhdf(double xi, double link_delay_s, int common_channels, const ReliabilityFactor& rf);

/// Cumulative path weight: sum of the link values. Zero for the empty path
/// and zero when any link is excluded.
WideReal path_weight(std::span<const Nhdf> links);

} // namespace crv
