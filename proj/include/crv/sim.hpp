#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crv/channels.hpp"
#include "crv/events.hpp"
#include "crv/messages.hpp"
#include "crv/metric.hpp"
#include "crv/mobility.hpp"
#include "crv/pu_model.hpp"
#include "crv/ranging.hpp"
#include "crv/reliability.hpp"
#include "crv/trace.hpp"

namespace crv {

enum class ProtocolKind { nhdf, greedy_baseline };

const char* protocol_name(ProtocolKind kind);

/// How intermediate nodes treat repeated RREQ copies of one discovery round.
/// per_request: forward the first copy only (scalable flood).
/// per_path: forward every distinct loop-free path, so small static
/// topologies surface every simple route to the destination.
enum class RreqSuppression { per_request, per_path };

struct DiscoveryParams {
    // A full-depth flood round trip costs well under 0.2 s with millisecond
    // control latencies, so the collection window stays short; queue time
    // spent waiting on discovery otherwise dominates sparse-network delay.
    double timeout_s = 0.3;            // RREP collection window at the source
    int hop_limit = 16;                // max links of a forwarded RREQ path
    double retry_backoff_s = 0.2;      // wait after a failed round
    double reply_backoff_max_s = 0.005; // random hold-off before replying/forwarding
    double rerr_suppress_s = 1.0;      // min spacing of repeat RERRs for one link
    RreqSuppression suppression = RreqSuppression::per_request;
};

struct SuspicionParams {
    int window = 20;            // observations needed before an initiator may trigger
    double drop_threshold = 0.5; // drops above this fraction look suspicious
    int vote_min_obs = 5;       // evidence a queried neighbor needs to vote
    double collect_s = 0.5;     // vote collection window
    double cooldown_s = 2.0;    // per-subject wait between rounds by one initiator
};

struct MetricParams {
    double collision_prob = 0.1;       // b_c, scenario constant
    double window_s = 1e-3;            // contention window z
    double channel_step_delay_s = 0.01; // per-index channel retune time
    MetricFloors floors;
    int control_bytes = 64; // control-plane payload size
};

struct FlowSpec {
    NodeId source = 0;
    NodeId dest = 0;
    double rate_pps = 4.0;
    double start_s = 0.0;
};

/// Scenario-scripted reliability injection: at `time`, `observer` marks
/// `subject` malicious, as if a suspicion round it ran had just passed quorum.
struct ScriptedFreeze {
    NodeId observer = 0;
    NodeId subject = 0;
    double time = 0.0;
};

struct SimConfig {
    int node_count = 200;
    double area_side_m = 4000.0;
    double tx_range_m = 500.0;
    double max_speed_mps = 2.0;
    HeadingPolicy mobility = HeadingPolicy::straight_road_bidirectional;
    double mobility_step_s = 0.5;
    int channel_count = 100;
    double run_time_s = 150.0;
    int packet_size_bytes = 512;
    double data_rate_bps = 2e6;
    int queue_capacity = 50;
    PuParams pu;
    RangingParams ranging;
    double ranging_noise_db = 0.0; // optional Gaussian dB perturbation of synthesized RSSI
    MetricParams metric;
    DiscoveryParams discovery;
    SuspicionParams suspicion;
    std::uint64_t seed = 1;
    std::vector<FlowSpec> flows;
    std::vector<NodeId> malicious;       // relays that silently drop data
    std::vector<ScriptedNode> scripted_nodes;
    std::vector<ScriptedFreeze> scripted_freezes;

    int packet_bits() const { return packet_size_bytes * 8; }
    int control_bits() const { return metric.control_bytes * 8; }

    /// Throws ConfigError on any inconsistent field.
    void validate() const;
};

enum class DropCause { queue_overflow, no_route, local_maximum, link_failure, hop_limit, blackhole };

const char* drop_cause_name(DropCause cause);

struct MetricsReport {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t in_flight_at_end = 0;
    std::uint64_t dropped_queue_overflow = 0;
    std::uint64_t dropped_no_route = 0;
    std::uint64_t dropped_local_maximum = 0;
    std::uint64_t dropped_link_failure = 0;
    std::uint64_t dropped_hop_limit = 0;
    std::uint64_t dropped_blackhole = 0;
    std::optional<double> pdr;              // null when nothing was sent
    double throughput_pps = 0.0;
    double throughput_bps = 0.0;
    std::optional<double> mean_e2e_delay_s; // null when nothing was delivered

    std::uint64_t dropped_total() const {
        return dropped_queue_overflow + dropped_no_route + dropped_local_maximum +
               dropped_link_failure + dropped_hop_limit + dropped_blackhole;
    }

    /// Canonical serialization; equal strings imply equal reports.
    std::string to_json_string() const;
};

class Simulator {
  public:
    Simulator(SimConfig cfg, ProtocolKind kind, TraceSink trace = TraceSink());

    /// Execute the full horizon and return the finished report.
    MetricsReport run();

    // World inspection (used by oracle-style tests on static scenarios).
    const SimConfig& config() const { return cfg_; }
    Position node_position(NodeId id) const { return field_.position(id); }
    ChannelSet idle_set(NodeId id) const;
    int operating_channel(NodeId id) const { return nodes_[id].op_channel; }
    const std::vector<NodeId>& radio_neighbors(NodeId id) const { return nbrs_[id]; }
    int neighbor_count(NodeId id) const { return static_cast<int>(nbrs_[id].size()); }
    const RouteTable& route_table(int flow) const { return flows_[flow].table; }
    const std::optional<RouteEntry>& active_route(int flow) const { return flows_[flow].active; }

  private:
    struct NodeState {
        int op_channel = 0;
        std::deque<std::uint64_t> queue;
        bool transmitting = false;
        ReliabilityLedger ledger;
        std::map<NodeId, ForwardWindow> watch;
        std::map<NodeId, double> round_cooldown;
        std::uint32_t rreq_seq = 0;
        std::uint32_t sqn_seq = 0;
        std::map<RequestId, ChannelSet> round_idle;
        std::map<RequestId, TimedFix> round_fix;
        std::map<RequestId, bool> rreq_seen; // per_request duplicate guard
        // Upstream RREQ sender facts memoized for the RREP pass.
        struct UpstreamInfo {
            ChannelSet idle;
            int op_channel = 0;
            int neighbor_count = 0;
            double est_distance_m = 0.0;
        };
        std::map<std::pair<RequestId, NodeId>, UpstreamInfo> upstream;
        std::map<RequestId, std::vector<std::vector<NodeId>>> answered; // dest-side path dedup
        std::map<std::pair<NodeId, NodeId>, double> rerr_sent; // per-link rate limit
    };

    struct FlowState {
        FlowSpec spec;
        RouteTable table;
        std::optional<RouteEntry> active;
        std::optional<std::uint32_t> pending_seq;
        double next_allowed_s = 0.0;
        bool retry_scheduled = false;
    };

    enum class PacketState { queued, in_flight, delivered, dropped };

    struct PacketRec {
        int flow = 0;
        NodeId src = 0;
        NodeId dst = 0;
        double created_s = 0.0;
        int bits = 0;
        PacketState state = PacketState::queued;
        DropCause cause = DropCause::no_route;
        double delivered_s = 0.0;
        double link_delay_sum_s = 0.0; // sum of per-hop Eq-10 delays actually applied
        std::vector<NodeId> route;     // stamped at the source for the reactive protocol
        int hop = 0;                   // index of the holder inside route
        int hops_done = 0;
    };

    struct SuspicionRound {
        NodeId initiator = 0;
        NodeId subject = 0;
        std::uint32_t id = 0;
        int votes_total = 0;
        int votes_suspect = 0;
        std::vector<NodeId> voters;
        bool concluded = false;
    };

    // --- engine ---
    void schedule(double time, EventKind kind, EventPayload payload);
    void dispatch(const Event& e);
    void refresh_neighbors();
    void finalize_metrics();

    bool in_range(NodeId a, NodeId b) const;
    ChannelSet idle_now(NodeId id) const;
    int common_now(NodeId a, NodeId b) const;
    double estimated_distance(NodeId a, NodeId b, double t);

    LinkDelays transport_delay(NodeId from, NodeId to, int bits) const;
    void send_control(NodeId from, NodeId to, ControlMessage msg, double t_send);
    void broadcast_control(NodeId from, ControlMessage msg, double t_send);

    // --- traffic / queues ---
    void on_traffic_emit(int flow);
    void enqueue_data(NodeId node, std::uint64_t pid);
    void service_queue(NodeId node);
    bool start_transmission(NodeId node, std::uint64_t pid); // false: head consumed (dropped)
    void on_data_delivery(const DataDelivery& d);
    void drop_packet(std::uint64_t pid, DropCause cause);
    void deliver_packet(std::uint64_t pid);

    // --- reactive protocol ---
    void ensure_discovery(int flow);
    void originate_discovery(int flow);
    void conclude_discovery(int flow, std::uint32_t seq);
    void on_rreq(NodeId node, const ControlDelivery& d);
    void answer_as_destination(NodeId node, const ControlDelivery& d);
    void on_rrep(NodeId node, const ControlDelivery& d);
    void on_rerr(NodeId node, const ControlDelivery& d);
    void handle_route_break(NodeId source_node, NodeId a, NodeId b);
    void emit_rerr(NodeId reporter, const std::vector<NodeId>& path, int reporter_index,
                   NodeId source, NodeId failed_a, NodeId failed_b);
    void detect_link_failures();
    std::optional<RouteEntry> select_usable(const FlowState& flow) const;
    void remember_upstream(NodeId node, const ControlDelivery& d);
    Nhdf score_upstream_link(NodeId node, const RequestId& rid, NodeId prev,
                             double acc_delay_in_s, const std::optional<TimedFix>& dest_fix,
                             double* link_delay_out);

    // --- reliability ---
    void watchdog_record(NodeId observer, NodeId subject, bool forwarded);
    void maybe_trigger_suspicion(NodeId observer, NodeId subject);
    void on_sqn_query(NodeId node, const ControlDelivery& d);
    void on_sqn_report(NodeId node, const ControlDelivery& d);
    void conclude_suspicion(NodeId initiator, std::uint32_t round);
    void apply_freeze(NodeId node, NodeId subject);

    // --- trace helpers ---
    void trace_msg(const char* dir, NodeId a, NodeId b, const ControlMessage& m,
                   const char* extra = nullptr);
    void trace_packet(const char* what, std::uint64_t pid, const char* cause = nullptr);

    SimConfig cfg_;
    ProtocolKind kind_;
    TraceSink trace_;
    MobilityField field_;
    PuActivityModel pu_;
    EventQueue events_;
    double now_ = 0.0;
    bool finished_ = false;
    Rng proto_rng_;
    std::vector<NodeState> nodes_;
    std::vector<FlowState> flows_;
    std::vector<PacketRec> packets_;
    std::vector<std::vector<NodeId>> nbrs_;
    std::vector<bool> malicious_;
    std::map<RequestId, int> round_flow_;
    std::map<std::pair<NodeId, std::uint32_t>, SuspicionRound> sqn_rounds_;
    MetricsReport report_;
};

/// Convenience wrapper: build, run, return the report.
MetricsReport run_simulation(const SimConfig& cfg, ProtocolKind kind,
                             TraceSink trace = TraceSink());

} // namespace crv
