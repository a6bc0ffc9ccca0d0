#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crv/channels.hpp"
#include "crv/errors.hpp"
#include "crv/kinematics.hpp"
#include "crv/metric.hpp"
#include "crv/mobility.hpp"
#include "crv/wide_real.hpp"

namespace crv {

enum class MsgKind { RREQ, RREP, RERR, SQN_QUERY, SQN_REPORT, DATA };

const char* msg_kind_name(MsgKind kind);

/// (origin, sequence) pair identifying one discovery round.
struct RequestId {
    NodeId origin = 0;
    std::uint32_t seq = 0;

    auto operator<=>(const RequestId&) const = default;
};

/// Control-plane payload. One struct covers every kind; unused fields stay
/// defaulted, which mirrors how on-wire headers carry optional blocks.
struct ControlMessage {
    MsgKind kind = MsgKind::RREQ;
    RequestId request_id;
    NodeId origin = 0; // VN_s
    NodeId target = 0; // VN_d
    std::vector<NodeId> path; // node ids visited, source first; never repeats a node
    WideReal accumulated_nhdf;
    bool path_excluded = false; // some link on the path got weight zero
    double accumulated_rf = 1.0; // max per-link reliability factor, reporting only
    bool accumulated_rf_infinite = false;
    double accumulated_delay_s = 0.0;
    std::optional<TimedFix> dest_fix; // destination handshake coordinates for RREP scoring
    int payload_bits = 0;
    int rrep_hop_index = 0;  // index in path of the node the RREP is addressed to
    // Facts about the last RREQ forwarder, consumed by the reverse pass.
    ChannelSet sender_idle;
    int sender_op_channel = 0;
    int sender_neighbor_count = 0;
    NodeId failed_a = 0;     // RERR: failed link endpoints
    NodeId failed_b = 0;
    NodeId subject = 0;      // SQN: node under suspicion
    std::uint32_t round_id = 0;
    bool suspect_vote = false;
    bool is_verdict = false; // SQN_REPORT: round outcome rather than a vote
    bool verdict_freeze = false;
    int report_count = 0;
};

/// One discovered path with its cumulative weight.
struct RouteEntry {
    WideReal weight;
    bool excluded = false; // weight forced to zero (unusable path)
    double rf = 1.0;       // path-level reliability aggregate, reporting only
    bool rf_infinite = false;
    std::vector<NodeId> path; // source first, destination last

    bool contains_node(NodeId id) const;
    bool contains_link(NodeId a, NodeId b) const; // consecutive pair, either direction
};

/// Ordered list of discovered routes; insertion order is discovery order.
class RouteTable {
  public:
    /// Appends after checking the entry invariants (loop-free, >= 2 nodes).
    void add(RouteEntry entry);

    /// Removes every entry whose path uses the given link (either direction).
    /// Returns the number of removed entries.
    int purge_link(NodeId a, NodeId b);

    /// Removes every entry whose path visits the given node.
    int purge_node(NodeId id);

    void clear() { entries_.clear(); }

    int size() const { return static_cast<int>(entries_.size()); }
    bool empty() const { return entries_.empty(); }
    const RouteEntry& entry(int i) const { return entries_[i]; }
    const std::vector<RouteEntry>& entries() const { return entries_; }

  private:
    std::vector<RouteEntry> entries_;
};

/// Maximum-weight entry, ties resolved to the earliest discovered (strict
/// improvement only). Throws NoRouteError on an empty table.
const RouteEntry& select_route(const RouteTable& table);

/// Index form of select_route, for callers that need the position.
int select_route_index(const RouteTable& table);

} // namespace crv
