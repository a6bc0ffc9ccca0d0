#include "crv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crv/kinematics.hpp"
#include "crv/ranging.hpp"
#include "crv/routing.hpp"

namespace crv {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

nlohmann::json path_json(const std::vector<NodeId>& path) {
    nlohmann::json a = nlohmann::json::array();
    for (NodeId n : path) a.push_back(n);
    return a;
}

} // namespace

const char* protocol_name(ProtocolKind kind) {
    return kind == ProtocolKind::nhdf ? "nhdf" : "greedy";
}

const char* drop_cause_name(DropCause cause) {
    switch (cause) {
        case DropCause::queue_overflow: return "queue_overflow";
        case DropCause::no_route: return "no_route";
        case DropCause::local_maximum: return "local_maximum";
        case DropCause::link_failure: return "link_failure";
        case DropCause::hop_limit: return "hop_limit";
        case DropCause::blackhole: return "blackhole";
    }
    return "?";
}

void SimConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (node_count <= 0) fail("node_count must be positive");
    if (area_side_m <= 0.0) fail("area_side_m must be positive");
    if (tx_range_m <= 0.0) fail("tx_range_m must be positive");
    if (max_speed_mps < 0.0) fail("max_speed_mps must be non-negative");
    if (mobility_step_s <= 0.0) fail("mobility_step_s must be positive");
    if (channel_count <= 0) fail("channel_count must be positive");
    if (run_time_s <= 0.0) fail("run_time_s must be positive");
    if (packet_size_bytes <= 0) fail("packet_size_bytes must be positive");
    if (data_rate_bps <= 0.0) fail("data_rate_bps must be positive");
    if (queue_capacity <= 0) fail("queue_capacity must be positive");
    if (!pu.valid()) fail("pu parameters invalid");
    if (!ranging.valid()) fail("ranging parameters invalid");
    if (ranging_noise_db < 0.0) fail("ranging_noise_db must be non-negative");
    if (!(metric.collision_prob > 0.0 && metric.collision_prob < 1.0)) {
        fail("metric.collision_prob must lie in (0, 1)");
    }
    if (metric.window_s <= 0.0) fail("metric.window_s must be positive");
    if (metric.channel_step_delay_s < 0.0) fail("metric.channel_step_delay_s must be >= 0");
    if (metric.floors.theta_rad <= 0.0 || metric.floors.speed_mps <= 0.0 ||
        metric.floors.tau_m <= 0.0) {
        fail("metric floors must be positive");
    }
    if (metric.control_bytes <= 0) fail("metric.control_bytes must be positive");
    if (discovery.timeout_s <= 0.0) fail("discovery.timeout_s must be positive");
    if (discovery.hop_limit < 1) fail("discovery.hop_limit must be >= 1");
    if (discovery.retry_backoff_s < 0.0) fail("discovery.retry_backoff_s must be >= 0");
    if (discovery.reply_backoff_max_s < 0.0) fail("discovery.reply_backoff_max_s must be >= 0");
    if (suspicion.window < 1) fail("suspicion.window must be >= 1");
    if (suspicion.vote_min_obs < 1) fail("suspicion.vote_min_obs must be >= 1");
    if (!(suspicion.drop_threshold > 0.0 && suspicion.drop_threshold < 1.0)) {
        fail("suspicion.drop_threshold must lie in (0, 1)");
    }
    if (suspicion.collect_s <= 0.0) fail("suspicion.collect_s must be positive");
    for (const auto& f : flows) {
        if (f.source >= static_cast<NodeId>(node_count) ||
            f.dest >= static_cast<NodeId>(node_count)) {
            fail("flow endpoint is not a known node id");
        }
        if (f.source == f.dest) fail("flow source equals destination (self-route)");
        if (f.rate_pps <= 0.0) fail("flow rate must be positive");
        if (f.start_s < 0.0) fail("flow start must be >= 0");
    }
    for (NodeId m : malicious) {
        if (m >= static_cast<NodeId>(node_count)) fail("malicious node id out of range");
    }
    for (const auto& s : scripted_nodes) {
        if (s.id >= static_cast<NodeId>(node_count)) fail("scripted node id out of range");
    }
    for (const auto& f : scripted_freezes) {
        if (f.observer >= static_cast<NodeId>(node_count) ||
            f.subject >= static_cast<NodeId>(node_count)) {
            fail("scripted freeze id out of range");
        }
        if (f.time < 0.0) fail("scripted freeze time must be >= 0");
    }
}

std::string MetricsReport::to_json_string() const {
    nlohmann::json j;
    j["sent"] = sent;
    j["delivered"] = delivered;
    j["in_flight_at_end"] = in_flight_at_end;
    j["dropped"] = {
        {"queue_overflow", dropped_queue_overflow},
        {"no_route", dropped_no_route},
        {"local_maximum", dropped_local_maximum},
        {"link_failure", dropped_link_failure},
        {"hop_limit", dropped_hop_limit},
        {"blackhole", dropped_blackhole},
    };
    j["pdr"] = pdr ? nlohmann::json(fmt_double(*pdr)) : nlohmann::json(nullptr);
    j["throughput_pps"] = fmt_double(throughput_pps);
    j["throughput_bps"] = fmt_double(throughput_bps);
    j["mean_e2e_delay_s"] =
        mean_e2e_delay_s ? nlohmann::json(fmt_double(*mean_e2e_delay_s)) : nlohmann::json(nullptr);
    return j.dump();
}

Simulator::Simulator(SimConfig cfg, ProtocolKind kind, TraceSink trace)
    : cfg_(std::move(cfg)),
      kind_(kind),
      trace_(trace),
      field_(MobilityModel{cfg_.area_side_m, cfg_.max_speed_mps, cfg_.mobility,
                           mix_seed(cfg_.seed, 1)},
             cfg_.node_count),
      pu_(cfg_.pu, cfg_.channel_count, cfg_.area_side_m, mix_seed(cfg_.seed, 2)),
      proto_rng_(mix_seed(cfg_.seed, 3)) {
    cfg_.validate();
    field_.apply_script(cfg_.scripted_nodes);
    nodes_.resize(cfg_.node_count);
    malicious_.assign(cfg_.node_count, false);
    for (NodeId m : cfg_.malicious) malicious_[m] = true;
    flows_.resize(cfg_.flows.size());
    for (std::size_t i = 0; i < cfg_.flows.size(); ++i) flows_[i].spec = cfg_.flows[i];
    nbrs_.assign(cfg_.node_count, {});
    refresh_neighbors();
    for (int i = 0; i < cfg_.node_count; ++i) {
        ChannelId lo = idle_now(i).lowest();
        nodes_[i].op_channel = lo >= 0 ? lo : 0;
    }
}

void Simulator::schedule(double time, EventKind kind, EventPayload payload) {
    if (time < now_ - 1e-12) {
        throw InvariantViolation("event scheduled before its cause");
    }
    events_.push(std::max(time, now_), kind, std::move(payload));
}

void Simulator::refresh_neighbors() {
    const double r = cfg_.tx_range_m;
    for (auto& v : nbrs_) v.clear();
    for (NodeId a = 0; a + 1 < static_cast<NodeId>(cfg_.node_count); ++a) {
        for (NodeId b = a + 1; b < static_cast<NodeId>(cfg_.node_count); ++b) {
            if (distance(field_.position(a), field_.position(b)) <= r) { // closed disc
                nbrs_[a].push_back(b);
                nbrs_[b].push_back(a);
            }
        }
    }
}

bool Simulator::in_range(NodeId a, NodeId b) const {
    // Neighbor lists are built in ascending id order.
    return std::binary_search(nbrs_[a].begin(), nbrs_[a].end(), b);
}

ChannelSet Simulator::idle_now(NodeId id) const { return pu_.sense(field_.position(id), now_); }

ChannelSet Simulator::idle_set(NodeId id) const { return idle_now(id); }

int Simulator::common_now(NodeId a, NodeId b) const {
    return ChannelSet::common_count(idle_now(a), idle_now(b));
}

double Simulator::estimated_distance(NodeId a, NodeId b, double t) {
    double true_d = distance(field_.position_at(a, t), field_.position_at(b, t));
    if (true_d <= 0.0) true_d = 1e-6; // coincident nodes still range a hair apart
    double kappa = distance_to_path_loss(true_d, cfg_.ranging);
    if (cfg_.ranging_noise_db > 0.0) {
        // Box-Muller from the protocol stream; only active when configured.
        double u1 = proto_rng_.uniform();
        double u2 = proto_rng_.uniform();
        double g = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586 * u2);
        kappa += cfg_.ranging_noise_db * g;
    }
    return path_loss_to_distance(kappa, cfg_.ranging);
}

LinkDelays Simulator::transport_delay(NodeId from, NodeId to, int bits) const {
    ChannelSet fi = idle_now(from);
    ChannelSet ti = idle_now(to);
    LinkDelays d;
    int v = neighbor_count(from);
    d.queuing_s = queuing_delay(bits, v, cfg_.data_rate_bps);
    d.backoff_s = backoff_delay_or_window(cfg_.metric.collision_prob, v, cfg_.metric.window_s);
    ChannelId ch = fi.lowest_common(ti);
    d.switching_s = ch < 0 ? 0.0
                           : switching_delay(nodes_[from].op_channel, ch,
                                             cfg_.metric.channel_step_delay_s);
    return d;
}

void Simulator::trace_msg(const char* dir, NodeId a, NodeId b, const ControlMessage& m,
                          const char* extra) {
    if (!trace_.enabled()) return;
    nlohmann::json j{{"t", now_},
                     {"ev", dir},
                     {"kind", msg_kind_name(m.kind)},
                     {"from", a},
                     {"to", b},
                     {"origin", m.request_id.origin},
                     {"req", m.request_id.seq}};
    if (extra) j["cause"] = extra;
    if (m.kind == MsgKind::RERR) {
        j["failed"] = {m.failed_a, m.failed_b};
    }
    if (m.kind == MsgKind::SQN_QUERY || m.kind == MsgKind::SQN_REPORT) {
        j["subject"] = m.subject;
        j["round"] = m.round_id;
    }
    trace_.emit(j);
}

void Simulator::trace_packet(const char* what, std::uint64_t pid, const char* cause) {
    if (!trace_.enabled()) return;
    const PacketRec& p = packets_[pid];
    nlohmann::json j{{"t", now_}, {"ev", what}, {"pkt", pid}, {"flow", p.flow},
                     {"src", p.src}, {"dst", p.dst}};
    if (cause) j["cause"] = cause;
    trace_.emit(j);
}

void Simulator::send_control(NodeId from, NodeId to, ControlMessage msg, double t_send) {
    if (!in_range(from, to) || common_now(from, to) == 0) {
        trace_msg("drop", from, to, msg, "link_unusable");
        return;
    }
    LinkDelays d = transport_delay(from, to, msg.payload_bits);
    trace_msg("send", from, to, msg);
    schedule(t_send + d.total_s(), EventKind::message_delivery,
             ControlDelivery{from, to, std::move(msg)});
}

void Simulator::broadcast_control(NodeId from, ControlMessage msg, double t_send) {
    trace_msg("send", from, from, msg, "broadcast");
    for (NodeId nbr : nbrs_[from]) {
        if (common_now(from, nbr) == 0) continue; // no shared channel, unreachable
        LinkDelays d = transport_delay(from, nbr, msg.payload_bits);
        schedule(t_send + d.total_s(), EventKind::message_delivery,
                 ControlDelivery{from, nbr, msg});
    }
}

MetricsReport Simulator::run() {
    // Seed the horizon: mobility lattice, PU chain, per-flow first emission,
    // and the final sample that freezes the report.
    if (cfg_.mobility_step_s <= cfg_.run_time_s) {
        schedule(cfg_.mobility_step_s, EventKind::mobility_step, MobilityStep{});
    }
    double pu_next = pu_.next_transition_time();
    if (std::isfinite(pu_next) && pu_next <= cfg_.run_time_s) {
        schedule(pu_next, EventKind::pu_transition, PuTransition{});
    }
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        if (flows_[i].spec.start_s < cfg_.run_time_s) {
            schedule(flows_[i].spec.start_s, EventKind::traffic_emit,
                     TrafficEmit{static_cast<int>(i)});
        }
    }
    for (const auto& f : cfg_.scripted_freezes) {
        if (f.time < cfg_.run_time_s) {
            schedule(f.time, EventKind::discovery_timeout,
                     FreezeInjection{f.observer, f.subject});
        }
    }
    schedule(cfg_.run_time_s, EventKind::metrics_sample, MetricsSample{});

    while (!events_.empty() && events_.top().time <= cfg_.run_time_s && !finished_) {
        Event e = events_.pop();
        if (e.time < now_ - 1e-12) {
            throw InvariantViolation("event dispatched before current time");
        }
        now_ = std::max(now_, e.time);
        dispatch(e);
    }
    if (!finished_) finalize_metrics();
    return report_;
}

void Simulator::dispatch(const Event& e) {
    switch (e.kind) {
        case EventKind::message_delivery:
            if (std::holds_alternative<ControlDelivery>(e.payload)) {
                const auto& d = std::get<ControlDelivery>(e.payload);
                trace_msg("recv", d.from, d.to, d.msg);
                switch (d.msg.kind) {
                    case MsgKind::RREQ: on_rreq(d.to, d); break;
                    case MsgKind::RREP: on_rrep(d.to, d); break;
                    case MsgKind::RERR: on_rerr(d.to, d); break;
                    case MsgKind::SQN_QUERY: on_sqn_query(d.to, d); break;
                    case MsgKind::SQN_REPORT: on_sqn_report(d.to, d); break;
                    case MsgKind::DATA: break; // data travels as DataDelivery
                }
            } else {
                on_data_delivery(std::get<DataDelivery>(e.payload));
            }
            break;
        case EventKind::mobility_step: {
            field_.step(cfg_.mobility_step_s);
            refresh_neighbors();
            if (kind_ == ProtocolKind::nhdf) detect_link_failures();
            double next = field_.step_time() + cfg_.mobility_step_s;
            if (next <= cfg_.run_time_s) {
                schedule(next, EventKind::mobility_step, MobilityStep{});
            }
            break;
        }
        case EventKind::pu_transition: {
            pu_.advance_to(now_);
            if (kind_ == ProtocolKind::nhdf) detect_link_failures();
            double next = pu_.next_transition_time();
            if (std::isfinite(next) && next <= cfg_.run_time_s) {
                schedule(next, EventKind::pu_transition, PuTransition{});
            }
            break;
        }
        case EventKind::traffic_emit:
            on_traffic_emit(std::get<TrafficEmit>(e.payload).flow);
            break;
        case EventKind::discovery_timeout:
            if (std::holds_alternative<DiscoveryDeadline>(e.payload)) {
                const auto& d = std::get<DiscoveryDeadline>(e.payload);
                conclude_discovery(d.flow, d.seq);
            } else if (std::holds_alternative<SuspicionDeadline>(e.payload)) {
                const auto& s = std::get<SuspicionDeadline>(e.payload);
                conclude_suspicion(s.initiator, s.round);
            } else if (std::holds_alternative<FreezeInjection>(e.payload)) {
                const auto& f = std::get<FreezeInjection>(e.payload);
                apply_freeze(f.observer, f.subject);
            } else {
                int flow = std::get<DiscoveryRetry>(e.payload).flow;
                FlowState& f = flows_[flow];
                f.retry_scheduled = false;
                if (!f.active && !f.pending_seq) {
                    // Re-attempt only when traffic is actually waiting.
                    const auto& q = nodes_[f.spec.source].queue;
                    bool waiting = std::any_of(q.begin(), q.end(), [&](std::uint64_t pid) {
                        return packets_[pid].flow == flow;
                    });
                    if (waiting) originate_discovery(flow);
                }
            }
            break;
        case EventKind::metrics_sample:
            finalize_metrics();
            break;
    }
}

// --------------------------------------------------------------------------
// Traffic and queues
// --------------------------------------------------------------------------

void Simulator::on_traffic_emit(int flow) {
    FlowState& f = flows_[flow];
    std::uint64_t pid = packets_.size();
    PacketRec rec;
    rec.flow = flow;
    rec.src = f.spec.source;
    rec.dst = f.spec.dest;
    rec.created_s = now_;
    rec.bits = cfg_.packet_bits();
    packets_.push_back(rec);
    trace_packet("pkt_created", pid);

    if (kind_ == ProtocolKind::nhdf) ensure_discovery(flow);
    enqueue_data(f.spec.source, pid);

    double next = now_ + 1.0 / f.spec.rate_pps;
    if (next < cfg_.run_time_s) {
        schedule(next, EventKind::traffic_emit, TrafficEmit{flow});
    }
}

void Simulator::enqueue_data(NodeId node, std::uint64_t pid) {
    NodeState& n = nodes_[node];
    if (static_cast<int>(n.queue.size()) >= cfg_.queue_capacity) {
        drop_packet(pid, DropCause::queue_overflow);
        return;
    }
    n.queue.push_back(pid);
    packets_[pid].state = PacketState::queued;
    service_queue(node);
}

void Simulator::service_queue(NodeId node) {
    NodeState& n = nodes_[node];
    while (!n.transmitting && !n.queue.empty()) {
        std::uint64_t pid = n.queue.front();
        PacketRec& p = packets_[pid];
        if (kind_ == ProtocolKind::nhdf && node == p.src && p.route.empty()) {
            FlowState& f = flows_[p.flow];
            if (f.active) {
                p.route = f.active->path;
                p.hop = 0;
            } else {
                // Head waits for the discovery in progress; conclude/retry
                // handlers re-kick this queue.
                break;
            }
        }
        n.queue.pop_front();
        if (!start_transmission(node, pid)) {
            continue; // head was dropped; try the next packet
        }
        break;
    }
}

bool Simulator::start_transmission(NodeId node, std::uint64_t pid) {
    NodeState& n = nodes_[node];
    PacketRec& p = packets_[pid];
    NodeId next = 0;

    if (kind_ == ProtocolKind::nhdf) {
        if (p.hop + 1 >= static_cast<int>(p.route.size()) || p.route[p.hop] != node) {
            throw InvariantViolation("data packet holder disagrees with its route");
        }
        next = p.route[p.hop + 1];
        if (!in_range(node, next) || common_now(node, next) == 0) {
            drop_packet(pid, DropCause::link_failure);
            if (node == p.src) {
                handle_route_break(node, node, next);
            } else {
                if (trace_.enabled()) {
                    trace_.emit({{"t", now_}, {"ev", "link_failure"}, {"a", node}, {"b", next}});
                }
                emit_rerr(node, p.route, p.hop, p.src, node, next);
            }
            return false;
        }
    } else {
        if (p.hops_done >= cfg_.discovery.hop_limit) {
            drop_packet(pid, DropCause::hop_limit);
            return false;
        }
        std::vector<GreedyCandidate> cands;
        cands.reserve(nbrs_[node].size());
        for (NodeId nbr : nbrs_[node]) {
            if (common_now(node, nbr) == 0) continue;
            cands.push_back({nbr, field_.position(nbr)});
        }
        auto pick = greedy_next_hop(field_.position(node), field_.position(p.dst), cands);
        if (!pick) {
            drop_packet(pid, DropCause::local_maximum);
            return false;
        }
        next = *pick;
    }

    LinkDelays d = transport_delay(node, next, p.bits);
    // Data transmissions retune the radio onto the link channel.
    ChannelId ch = idle_now(node).lowest_common(idle_now(next));
    if (ch >= 0) n.op_channel = ch;
    p.state = PacketState::in_flight;
    p.link_delay_sum_s += d.total_s();
    n.transmitting = true;
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "data_send"}, {"pkt", pid}, {"from", node},
                     {"to", next}, {"delay", d.total_s()}});
    }
    schedule(now_ + d.total_s(), EventKind::message_delivery, DataDelivery{node, next, pid});
    return true;
}

void Simulator::on_data_delivery(const DataDelivery& d) {
    nodes_[d.from].transmitting = false;
    PacketRec& p = packets_[d.packet_id];
    p.hops_done += 1;
    if (kind_ == ProtocolKind::nhdf) p.hop += 1;

    if (d.to == p.dst) {
        deliver_packet(d.packet_id);
    } else if (malicious_[d.to]) {
        drop_packet(d.packet_id, DropCause::blackhole);
        watchdog_record(d.from, d.to, false);
    } else {
        watchdog_record(d.from, d.to, true);
        enqueue_data(d.to, d.packet_id);
    }
    service_queue(d.from);
}

void Simulator::drop_packet(std::uint64_t pid, DropCause cause) {
    PacketRec& p = packets_[pid];
    p.state = PacketState::dropped;
    p.cause = cause;
    trace_packet("pkt_dropped", pid, drop_cause_name(cause));
}

void Simulator::deliver_packet(std::uint64_t pid) {
    PacketRec& p = packets_[pid];
    p.state = PacketState::delivered;
    p.delivered_s = now_;
    if (now_ - p.created_s < p.link_delay_sum_s - 1e-9) {
        throw InvariantViolation("delivered packet undercuts the sum of its link delays");
    }
    trace_packet("pkt_delivered", pid);
}

// --------------------------------------------------------------------------
// Route discovery
// --------------------------------------------------------------------------

void Simulator::ensure_discovery(int flow) {
    FlowState& f = flows_[flow];
    if (f.active || f.pending_seq) return;
    if (now_ >= f.next_allowed_s) {
        originate_discovery(flow);
    } else if (!f.retry_scheduled) {
        f.retry_scheduled = true;
        schedule(f.next_allowed_s, EventKind::discovery_timeout, DiscoveryRetry{flow});
    }
}

void Simulator::originate_discovery(int flow) {
    FlowState& f = flows_[flow];
    NodeId src = f.spec.source;
    if (src == f.spec.dest) throw InvalidInput("self-route discovery rejected");
    NodeState& n = nodes_[src];
    RequestId rid{src, ++n.rreq_seq};
    f.pending_seq = rid.seq;
    round_flow_[rid] = flow;
    n.round_idle.emplace(rid, idle_now(src));

    ControlMessage msg;
    msg.kind = MsgKind::RREQ;
    msg.request_id = rid;
    msg.origin = src;
    msg.target = f.spec.dest;
    msg.path = {src};
    msg.payload_bits = cfg_.control_bits();
    msg.sender_idle = n.round_idle.at(rid);
    msg.sender_op_channel = n.op_channel;
    msg.sender_neighbor_count = neighbor_count(src);

    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "rreq_originate"}, {"flow", flow}, {"src", src},
                     {"dst", f.spec.dest}, {"req", rid.seq}});
    }
    broadcast_control(src, std::move(msg), now_);
    schedule(now_ + cfg_.discovery.timeout_s, EventKind::discovery_timeout,
             DiscoveryDeadline{flow, rid.seq});
}

void Simulator::remember_upstream(NodeId node, const ControlDelivery& d) {
    NodeState& n = nodes_[node];
    NodeState::UpstreamInfo info;
    info.idle = d.msg.sender_idle;
    info.op_channel = d.msg.sender_op_channel;
    info.neighbor_count = d.msg.sender_neighbor_count;
    info.est_distance_m = estimated_distance(node, d.from, now_);
    n.upstream[{d.msg.request_id, d.from}] = std::move(info);
}

void Simulator::on_rreq(NodeId node, const ControlDelivery& d) {
    NodeState& n = nodes_[node];
    const ControlMessage& msg = d.msg;
    const RequestId rid = msg.request_id;

    if (n.ledger.is_frozen(d.from)) {
        trace_msg("drop", d.from, node, msg, "sender_frozen");
        return;
    }
    if (node == msg.target) {
        answer_as_destination(node, d);
        return;
    }
    if (std::find(msg.path.begin(), msg.path.end(), node) != msg.path.end()) {
        trace_msg("drop", d.from, node, msg, "loop");
        return;
    }
    if (cfg_.discovery.suppression == RreqSuppression::per_request) {
        if (n.rreq_seen.count(rid)) {
            trace_msg("drop", d.from, node, msg, "duplicate");
            return;
        }
        n.rreq_seen[rid] = true;
    }
    if (static_cast<int>(msg.path.size()) >= cfg_.discovery.hop_limit) {
        trace_msg("drop", d.from, node, msg, "hop_limit");
        return;
    }

    // First touch of this round: snapshot the idle set and start the fix.
    auto [it, fresh] = n.round_idle.emplace(rid, ChannelSet());
    if (fresh) it->second = idle_now(node);
    remember_upstream(node, d);
    double t_send = now_ + proto_rng_.uniform(0.0, cfg_.discovery.reply_backoff_max_s);
    if (!n.round_fix.count(rid)) {
        TimedFix fix;
        fix.receive_time_s = now_;
        fix.receive_pos = field_.position_at(node, now_);
        fix.send_time_s = t_send;
        fix.send_pos = field_.position_at(node, t_send);
        n.round_fix[rid] = fix;
    }

    ControlMessage fwd = msg;
    fwd.path.push_back(node);
    fwd.sender_idle = n.round_idle.at(rid);
    fwd.sender_op_channel = n.op_channel;
    fwd.sender_neighbor_count = neighbor_count(node);
    broadcast_control(node, std::move(fwd), t_send);
}

void Simulator::answer_as_destination(NodeId node, const ControlDelivery& d) {
    NodeState& n = nodes_[node];
    const ControlMessage& msg = d.msg;
    const RequestId rid = msg.request_id;

    std::vector<NodeId> full = msg.path;
    full.push_back(node);
    auto& seen = n.answered[rid];
    if (std::find(seen.begin(), seen.end(), full) != seen.end()) {
        trace_msg("drop", d.from, node, msg, "duplicate_path");
        return;
    }
    seen.push_back(full);

    auto [it, fresh] = n.round_idle.emplace(rid, ChannelSet());
    if (fresh) it->second = idle_now(node);
    remember_upstream(node, d);

    double t_send = now_ + proto_rng_.uniform(0.0, cfg_.discovery.reply_backoff_max_s);
    if (!n.round_fix.count(rid)) {
        TimedFix fix;
        fix.receive_time_s = now_;
        fix.receive_pos = field_.position_at(node, now_);
        fix.send_time_s = t_send;
        fix.send_pos = field_.position_at(node, t_send);
        n.round_fix[rid] = fix;
    }

    ControlMessage rrep;
    rrep.kind = MsgKind::RREP;
    rrep.request_id = rid;
    rrep.origin = msg.origin;
    rrep.target = msg.target;
    rrep.path = full;
    rrep.payload_bits = cfg_.control_bits();
    rrep.dest_fix = n.round_fix.at(rid);

    double link_delay = 0.0;
    Nhdf score = score_upstream_link(node, rid, d.from, 0.0, rrep.dest_fix, &link_delay);
    rrep.accumulated_delay_s = link_delay;
    if (score.excluded()) {
        rrep.path_excluded = true;
    } else {
        rrep.accumulated_nhdf = score.value();
    }
    ReliabilityFactor rf = nodes_[d.from].ledger.factor(node);
    if (rf.is_infinite()) {
        rrep.accumulated_rf_infinite = true;
    } else {
        rrep.accumulated_rf = rf.value();
    }
    rrep.rrep_hop_index = static_cast<int>(full.size()) - 2;
    send_control(node, d.from, std::move(rrep), t_send);
}

Nhdf Simulator::score_upstream_link(NodeId node, const RequestId& rid, NodeId prev,
                                    double acc_delay_in_s,
                                    const std::optional<TimedFix>& dest_fix,
                                    double* link_delay_out) {
    NodeState& n = nodes_[node];
    auto up_it = n.upstream.find({rid, prev});
    if (up_it == n.upstream.end()) {
        throw InvariantViolation("RREP pass without a memoized upstream RREQ");
    }
    const auto& up = up_it->second;
    const ChannelSet& own_idle = n.round_idle.at(rid);

    int cn = ChannelSet::common_count(up.idle, own_idle);
    LinkDelays dl;
    dl.queuing_s = queuing_delay(cfg_.packet_bits(), up.neighbor_count, cfg_.data_rate_bps);
    dl.backoff_s = backoff_delay_or_window(cfg_.metric.collision_prob, up.neighbor_count,
                                           cfg_.metric.window_s);
    ChannelId ch = up.idle.lowest_common(own_idle);
    dl.switching_s = ch < 0 ? 0.0
                            : switching_delay(up.op_channel, ch,
                                              cfg_.metric.channel_step_delay_s);
    double link_delay = dl.total_s();
    *link_delay_out = link_delay;

    TimedFix fix = n.round_fix.at(rid);
    // Transmission time of the reply this node is about to send upstream.
    fix.transit_time_s = transport_delay(node, prev, cfg_.control_bits()).total_s();
    double speed = std::max(estimate_speed(fix), cfg_.metric.floors.speed_mps);

    double theta = cfg_.metric.floors.theta_rad;
    if (dest_fix) {
        auto angle = heading_angle(fix.receive_pos, fix.send_pos, dest_fix->receive_pos,
                                   dest_fix->send_pos);
        if (angle) theta = *angle;
    }
    double tau = std::max(displacement(up.est_distance_m, theta), cfg_.metric.floors.tau_m);

    double path_delay = acc_delay_in_s + link_delay;
    double xi = transmit_weight(cfg_.tx_range_m, tau, path_delay, speed);
    ReliabilityFactor rf = nodes_[prev].ledger.factor(node);
    return link_nhdf(xi, link_delay, cn, rf);
}

void Simulator::on_rrep(NodeId node, const ControlDelivery& d) {
    NodeState& n = nodes_[node];
    const ControlMessage& msg = d.msg;
    if (n.ledger.is_frozen(d.from)) {
        trace_msg("drop", d.from, node, msg, "sender_frozen");
        return;
    }
    int k = msg.rrep_hop_index;
    if (k < 0 || k >= static_cast<int>(msg.path.size()) || msg.path[k] != node) {
        trace_msg("drop", d.from, node, msg, "misrouted");
        return;
    }

    if (k == 0) {
        // Source side: the round is finished, file the entry.
        auto rf_it = round_flow_.find(msg.request_id);
        if (rf_it == round_flow_.end()) return;
        FlowState& f = flows_[rf_it->second];
        RouteEntry entry;
        entry.path = msg.path;
        entry.rf = msg.accumulated_rf;
        entry.rf_infinite = msg.accumulated_rf_infinite;
        bool frozen_member = false;
        for (NodeId hop : msg.path) {
            if (n.ledger.is_frozen(hop)) frozen_member = true;
        }
        entry.excluded = msg.path_excluded || frozen_member;
        entry.weight = entry.excluded ? WideReal::zero() : msg.accumulated_nhdf;
        f.table.add(entry);
        if (trace_.enabled()) {
            trace_.emit({{"t", now_}, {"ev", "route_stored"}, {"flow", rf_it->second},
                         {"path", path_json(entry.path)},
                         {"weight_log10", entry.weight.log10()},
                         {"excluded", entry.excluded}});
        }
        return;
    }

    NodeId prev = msg.path[k - 1];
    if (!in_range(node, prev) || common_now(node, prev) == 0) {
        trace_msg("drop", d.from, node, msg, "reverse_link_lost");
        return;
    }
    double link_delay = 0.0;
    Nhdf score = score_upstream_link(node, msg.request_id, prev, msg.accumulated_delay_s,
                                     msg.dest_fix, &link_delay);
    ControlMessage fwd = msg;
    fwd.accumulated_delay_s += link_delay;
    if (score.excluded()) {
        fwd.path_excluded = true;
    } else if (!fwd.path_excluded) {
        fwd.accumulated_nhdf = fwd.accumulated_nhdf + score.value();
    }
    ReliabilityFactor rf = nodes_[prev].ledger.factor(node);
    if (rf.is_infinite()) {
        fwd.accumulated_rf_infinite = true;
    } else if (!fwd.accumulated_rf_infinite) {
        fwd.accumulated_rf = std::max(fwd.accumulated_rf, rf.value());
    }
    fwd.rrep_hop_index = k - 1;
    send_control(node, prev, std::move(fwd), now_);
}

std::optional<RouteEntry> Simulator::select_usable(const FlowState& flow) const {
    const NodeState& src = nodes_[flow.spec.source];
    int best = -1;
    for (int i = 0; i < flow.table.size(); ++i) {
        const RouteEntry& e = flow.table.entry(i);
        if (e.excluded || e.weight.is_zero()) continue;
        bool frozen = false;
        for (NodeId hop : e.path) {
            if (src.ledger.is_frozen(hop)) frozen = true;
        }
        if (frozen) continue;
        if (best < 0 || e.weight > flow.table.entry(best).weight) best = i;
    }
    if (best < 0) return std::nullopt;
    return flow.table.entry(best);
}

void Simulator::conclude_discovery(int flow, std::uint32_t seq) {
    FlowState& f = flows_[flow];
    if (!f.pending_seq || *f.pending_seq != seq) return; // superseded round
    f.pending_seq.reset();
    auto pick = select_usable(f);
    if (pick) {
        f.active = *pick;
        if (trace_.enabled()) {
            trace_.emit({{"t", now_}, {"ev", "route_selected"}, {"flow", flow},
                         {"path", path_json(pick->path)},
                         {"weight_log10", pick->weight.log10()},
                         {"reason", "discovery"}});
        }
        service_queue(f.spec.source);
        return;
    }
    // Round produced nothing usable: waiting traffic is undeliverable.
    NodeState& src = nodes_[f.spec.source];
    for (auto it = src.queue.begin(); it != src.queue.end();) {
        if (packets_[*it].flow == flow) {
            drop_packet(*it, DropCause::no_route);
            it = src.queue.erase(it);
        } else {
            ++it;
        }
    }
    f.next_allowed_s = now_ + cfg_.discovery.retry_backoff_s;
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "discovery_failed"}, {"flow", flow}});
    }
    service_queue(f.spec.source);
}

void Simulator::on_rerr(NodeId node, const ControlDelivery& d) {
    const ControlMessage& msg = d.msg;
    if (node == msg.target) {
        handle_route_break(node, msg.failed_a, msg.failed_b);
        return;
    }
    int k = msg.rrep_hop_index;
    if (k <= 0 || k >= static_cast<int>(msg.path.size()) || msg.path[k] != node) return;
    ControlMessage fwd = msg;
    fwd.rrep_hop_index = k - 1;
    send_control(node, msg.path[k - 1], std::move(fwd), now_);
}

void Simulator::handle_route_break(NodeId source_node, NodeId a, NodeId b) {
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        FlowState& f = flows_[i];
        if (f.spec.source != source_node) continue;
        f.table.purge_link(a, b);
        if (f.active && f.active->contains_link(a, b)) {
            f.active.reset();
            auto pick = select_usable(f);
            if (pick) {
                f.active = *pick;
                if (trace_.enabled()) {
                    trace_.emit({{"t", now_}, {"ev", "route_selected"},
                                 {"flow", static_cast<int>(i)},
                                 {"path", path_json(pick->path)},
                                 {"weight_log10", pick->weight.log10()},
                                 {"reason", "failover"}});
                }
            } else if (!f.pending_seq) {
                originate_discovery(static_cast<int>(i));
            }
        }
        service_queue(source_node);
    }
}

void Simulator::emit_rerr(NodeId reporter, const std::vector<NodeId>& path, int reporter_index,
                          NodeId source, NodeId failed_a, NodeId failed_b) {
    // Repeat reports for one broken link are rate-limited; queued traffic at a
    // predecessor would otherwise emit one per packet.
    std::pair<NodeId, NodeId> key = std::minmax(failed_a, failed_b);
    auto& last = nodes_[reporter].rerr_sent;
    auto it = last.find(key);
    if (it != last.end() && now_ < it->second + cfg_.discovery.rerr_suppress_s) return;
    last[key] = now_;

    ControlMessage rerr;
    rerr.kind = MsgKind::RERR;
    rerr.origin = reporter;
    rerr.target = source;
    rerr.path = path;
    rerr.failed_a = failed_a;
    rerr.failed_b = failed_b;
    rerr.rrep_hop_index = reporter_index - 1;
    rerr.payload_bits = cfg_.control_bits();
    send_control(reporter, path[reporter_index - 1], rerr, now_);
}

void Simulator::detect_link_failures() {
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        FlowState& f = flows_[i];
        if (!f.active) continue;
        const auto& path = f.active->path;
        for (std::size_t h = 0; h + 1 < path.size(); ++h) {
            NodeId a = path[h];
            NodeId b = path[h + 1];
            if (in_range(a, b) && common_now(a, b) > 0) continue;
            if (trace_.enabled()) {
                trace_.emit({{"t", now_}, {"ev", "link_failure"}, {"a", a}, {"b", b},
                             {"flow", static_cast<int>(i)}});
            }
            if (a == f.spec.source) {
                handle_route_break(a, a, b);
            } else {
                emit_rerr(a, path, static_cast<int>(h), f.spec.source, a, b);
            }
            break; // one report per flow per check
        }
    }
}

// --------------------------------------------------------------------------
// Reliability rounds
// --------------------------------------------------------------------------

void Simulator::watchdog_record(NodeId observer, NodeId subject, bool forwarded) {
    if (kind_ != ProtocolKind::nhdf) return; // the baseline has no reliability plane
    NodeState& o = nodes_[observer];
    auto [it, _] = o.watch.try_emplace(subject, ForwardWindow(cfg_.suspicion.window));
    it->second.record(forwarded);
    if (!forwarded) maybe_trigger_suspicion(observer, subject);
}

void Simulator::maybe_trigger_suspicion(NodeId observer, NodeId subject) {
    NodeState& o = nodes_[observer];
    if (o.ledger.is_frozen(subject)) return;
    auto w = o.watch.find(subject);
    if (w == o.watch.end() ||
        !w->second.suspicious(cfg_.suspicion.drop_threshold, cfg_.suspicion.window)) {
        return;
    }
    auto cool = o.round_cooldown.find(subject);
    if (cool != o.round_cooldown.end() && now_ < cool->second) return;
    o.round_cooldown[subject] = now_ + cfg_.suspicion.cooldown_s;

    std::uint32_t round = ++o.sqn_seq;
    SuspicionRound r;
    r.initiator = observer;
    r.subject = subject;
    r.id = round;
    r.votes_total = 1; // the initiator votes suspect by construction
    r.votes_suspect = 1;
    sqn_rounds_[{observer, round}] = r;

    ControlMessage q;
    q.kind = MsgKind::SQN_QUERY;
    q.origin = observer;
    q.subject = subject;
    q.round_id = round;
    q.payload_bits = cfg_.control_bits();
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "sqn_round"}, {"initiator", observer},
                     {"subject", subject}, {"round", round}});
    }
    broadcast_control(observer, std::move(q), now_);
    schedule(now_ + cfg_.suspicion.collect_s, EventKind::discovery_timeout,
             SuspicionDeadline{observer, round});
}

void Simulator::on_sqn_query(NodeId node, const ControlDelivery& d) {
    const ControlMessage& msg = d.msg;
    if (node == msg.subject) return;
    if (!in_range(node, msg.subject)) return; // only the subject's neighbors judge
    NodeState& n = nodes_[node];
    auto w = n.watch.find(msg.subject);
    int obs = w == n.watch.end() ? 0 : w->second.observations();
    if (obs < cfg_.suspicion.vote_min_obs) return; // abstain without evidence

    ControlMessage vote;
    vote.kind = MsgKind::SQN_REPORT;
    vote.origin = node;
    vote.target = msg.origin;
    vote.subject = msg.subject;
    vote.round_id = msg.round_id;
    vote.suspect_vote =
        w->second.suspicious(cfg_.suspicion.drop_threshold, cfg_.suspicion.vote_min_obs);
    vote.payload_bits = cfg_.control_bits();
    double t_send = now_ + proto_rng_.uniform(0.0, cfg_.discovery.reply_backoff_max_s);
    send_control(node, msg.origin, std::move(vote), t_send);
}

void Simulator::on_sqn_report(NodeId node, const ControlDelivery& d) {
    const ControlMessage& msg = d.msg;
    if (msg.is_verdict) {
        if (node == msg.subject) return; // the subject keeps no opinion of itself
        if (msg.verdict_freeze) {
            apply_freeze(node, msg.subject);
        } else if (msg.target == node) {
            nodes_[node].ledger.add_reports(msg.subject, msg.report_count);
            auto w = nodes_[node].watch.find(msg.subject);
            if (w != nodes_[node].watch.end()) w->second.clear();
        }
        return;
    }
    // A vote arriving at the initiator of an open round.
    auto it = sqn_rounds_.find({node, msg.round_id});
    if (it == sqn_rounds_.end() || it->second.concluded) return;
    if (it->second.subject != msg.subject) return;
    it->second.votes_total += 1;
    if (msg.suspect_vote) it->second.votes_suspect += 1;
    it->second.voters.push_back(msg.origin);
}

void Simulator::conclude_suspicion(NodeId initiator, std::uint32_t round) {
    auto it = sqn_rounds_.find({initiator, round});
    if (it == sqn_rounds_.end() || it->second.concluded) return;
    SuspicionRound& r = it->second;
    r.concluded = true;
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "sqn_tally"}, {"initiator", initiator},
                     {"subject", r.subject}, {"suspect", r.votes_suspect},
                     {"total", r.votes_total}});
    }
    if (ReliabilityLedger::quorum_exceeded(r.votes_suspect, r.votes_total)) {
        ControlMessage verdict;
        verdict.kind = MsgKind::SQN_REPORT;
        verdict.origin = initiator;
        verdict.subject = r.subject;
        verdict.is_verdict = true;
        verdict.verdict_freeze = true;
        verdict.payload_bits = cfg_.control_bits();
        broadcast_control(initiator, std::move(verdict), now_);
        apply_freeze(initiator, r.subject);
    } else {
        int reports = r.votes_suspect;
        nodes_[initiator].ledger.add_reports(r.subject, reports);
        auto w = nodes_[initiator].watch.find(r.subject);
        if (w != nodes_[initiator].watch.end()) w->second.clear();
        for (NodeId voter : r.voters) {
            ControlMessage out;
            out.kind = MsgKind::SQN_REPORT;
            out.origin = initiator;
            out.target = voter;
            out.subject = r.subject;
            out.is_verdict = true;
            out.report_count = reports;
            out.payload_bits = cfg_.control_bits();
            send_control(initiator, voter, std::move(out), now_);
        }
    }
}

void Simulator::apply_freeze(NodeId node, NodeId subject) {
    NodeState& n = nodes_[node];
    if (n.ledger.is_frozen(subject)) return;
    n.ledger.freeze(subject);
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "rf_frozen"}, {"at", node}, {"subject", subject}});
    }
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        FlowState& f = flows_[i];
        if (f.spec.source != node) continue;
        f.table.purge_node(subject);
        if (f.active && f.active->contains_node(subject)) {
            f.active.reset();
            auto pick = select_usable(f);
            if (pick) {
                f.active = *pick;
                if (trace_.enabled()) {
                    trace_.emit({{"t", now_}, {"ev", "route_selected"},
                                 {"flow", static_cast<int>(i)},
                                 {"path", path_json(pick->path)},
                                 {"weight_log10", pick->weight.log10()},
                                 {"reason", "freeze"}});
                }
            } else if (!f.pending_seq) {
                const auto& q = nodes_[node].queue;
                bool waiting = std::any_of(q.begin(), q.end(), [&](std::uint64_t pid) {
                    return packets_[pid].flow == static_cast<int>(i);
                });
                if (waiting && now_ >= f.next_allowed_s) originate_discovery(static_cast<int>(i));
            }
        }
    }
    service_queue(node);
}

// --------------------------------------------------------------------------
// Metrics
// --------------------------------------------------------------------------

void Simulator::finalize_metrics() {
    if (finished_) return;
    finished_ = true;
    MetricsReport r;
    double delay_sum = 0.0;
    for (const PacketRec& p : packets_) {
        r.sent += 1;
        switch (p.state) {
            case PacketState::delivered:
                r.delivered += 1;
                delay_sum += p.delivered_s - p.created_s;
                break;
            case PacketState::queued:
            case PacketState::in_flight:
                r.in_flight_at_end += 1;
                break;
            case PacketState::dropped:
                switch (p.cause) {
                    case DropCause::queue_overflow: r.dropped_queue_overflow += 1; break;
                    case DropCause::no_route: r.dropped_no_route += 1; break;
                    case DropCause::local_maximum: r.dropped_local_maximum += 1; break;
                    case DropCause::link_failure: r.dropped_link_failure += 1; break;
                    case DropCause::hop_limit: r.dropped_hop_limit += 1; break;
                    case DropCause::blackhole: r.dropped_blackhole += 1; break;
                }
                break;
        }
    }
    if (r.sent != r.delivered + r.dropped_total() + r.in_flight_at_end) {
        throw InvariantViolation("packet conservation failed: sent != delivered+dropped+in_flight");
    }
    if (r.sent > 0) r.pdr = static_cast<double>(r.delivered) / static_cast<double>(r.sent);
    r.throughput_pps = static_cast<double>(r.delivered) / cfg_.run_time_s;
    r.throughput_bps = r.throughput_pps * static_cast<double>(cfg_.packet_bits());
    if (r.delivered > 0) r.mean_e2e_delay_s = delay_sum / static_cast<double>(r.delivered);
    report_ = r;
    if (trace_.enabled()) {
        trace_.emit({{"t", now_}, {"ev", "report"}, {"json", r.to_json_string()}});
    }
}

MetricsReport run_simulation(const SimConfig& cfg, ProtocolKind kind, TraceSink trace) {
    Simulator sim(cfg, kind, trace);
    return sim.run();
}

} // namespace crv
