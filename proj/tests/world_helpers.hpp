#pragma once

// Shared fixtures for the simulator tests: scripted static/kinematic worlds,
// JSONL trace capture, and an independent re-evaluation of the path weight a
// discovery round should produce.

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crv/ranging.hpp"
#include "crv/sim.hpp"

namespace crvtest {

using namespace crv;

struct NodePlan {
    Position pos;
    Vec2 vel{0.0, 0.0};
};

/// Scripted world with every node pinned. Reply back-off defaults to zero so
/// route weights depend on geometry alone (mobility estimates floor out).
inline SimConfig scripted_world(const std::vector<NodePlan>& nodes, std::vector<FlowSpec> flows,
                                double run_time_s = 30.0) {
    SimConfig c;
    c.node_count = static_cast<int>(nodes.size());
    c.area_side_m = 4000.0;
    c.run_time_s = run_time_s;
    c.max_speed_mps = 25.0; // covers any scripted velocity used by the fixtures
    c.pu.mean_on_s = 1e-6;  // primaries effectively silent: all channels idle
    c.pu.mean_off_s = 1e12;
    c.pu.grid_cells = 1;
    c.discovery.reply_backoff_max_s = 0.0;
    c.flows = std::move(flows);
    c.seed = 1;
    for (NodeId i = 0; i < nodes.size(); ++i) {
        c.scripted_nodes.push_back({i, nodes[i].pos, nodes[i].vel});
    }
    return c;
}

struct TraceRun {
    MetricsReport report;
    std::vector<nlohmann::json> events;
    std::string raw;
};

inline TraceRun run_traced(const SimConfig& cfg, ProtocolKind kind) {
    std::ostringstream oss;
    TraceSink sink(oss);
    Simulator sim(cfg, kind, sink);
    TraceRun out;
    out.report = sim.run();
    out.raw = oss.str();
    std::istringstream in(out.raw);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.events.push_back(nlohmann::json::parse(line));
    }
    return out;
}

inline int count_events(const TraceRun& run, const std::string& ev, double after = -1.0) {
    int n = 0;
    for (const auto& e : run.events) {
        if (e.at("ev") == ev && e.at("t").get<double>() > after) ++n;
    }
    return n;
}

inline std::vector<nlohmann::json> events_of(const TraceRun& run, const std::string& ev) {
    std::vector<nlohmann::json> out;
    for (const auto& e : run.events) {
        if (e.at("ev") == ev) out.push_back(e);
    }
    return out;
}

inline std::vector<NodeId> path_of(const nlohmann::json& e) {
    std::vector<NodeId> p;
    for (const auto& v : e.at("path")) p.push_back(v.get<NodeId>());
    return p;
}

// ---------------------------------------------------------------------------
// Discovery-round oracle for static scripted worlds.
//
// Re-derives what one round should compute for a given path, using only the
// world facts visible before the round: positions, idle sets, operating
// channels and neighborhood sizes. Static nodes make every mobility estimate
// fall to its floor, so the weight is a pure function of those facts.
// ---------------------------------------------------------------------------

struct WorldView {
    SimConfig cfg;
    std::vector<Position> pos;
    std::vector<ChannelSet> idle;
    std::vector<int> op_channel;
    std::vector<int> nbr_count;
    std::vector<std::vector<NodeId>> nbrs;
};

inline WorldView capture_world(const Simulator& sim) {
    WorldView w;
    w.cfg = sim.config();
    for (NodeId i = 0; i < static_cast<NodeId>(w.cfg.node_count); ++i) {
        w.pos.push_back(sim.node_position(i));
        w.idle.push_back(sim.idle_set(i));
        w.op_channel.push_back(sim.operating_channel(i));
        w.nbr_count.push_back(sim.neighbor_count(i));
        w.nbrs.push_back(sim.radio_neighbors(i));
    }
    return w;
}

inline double oracle_link_delay(const WorldView& w, NodeId from, NodeId to) {
    double q = w.cfg.packet_bits() * static_cast<double>(w.nbr_count[from]) / w.cfg.data_rate_bps;
    double b = w.nbr_count[from] <= 1
                   ? w.cfg.metric.window_s
                   : w.cfg.metric.window_s /
                         ((1.0 - w.cfg.metric.collision_prob) *
                          (1.0 - std::pow(1.0 - w.cfg.metric.collision_prob,
                                          w.nbr_count[from] - 1)));
    ChannelId ch = w.idle[from].lowest_common(w.idle[to]);
    double sw = ch < 0 ? 0.0
                       : w.cfg.metric.channel_step_delay_s *
                             std::abs(w.op_channel[from] - ch);
    return q + b + sw;
}

/// Cumulative weight of one source->destination path, evaluated in the same
/// reverse (destination-first) order a reply pass uses. Returns zero when any
/// link lacks a common idle channel.
inline WideReal oracle_path_weight(const WorldView& w, const std::vector<NodeId>& path) {
    WideReal total = WideReal::zero();
    double acc_delay = 0.0;
    for (int k = static_cast<int>(path.size()) - 2; k >= 0; --k) {
        NodeId from = path[k];
        NodeId to = path[k + 1];
        int cn = ChannelSet::common_count(w.idle[from], w.idle[to]);
        if (cn == 0) return WideReal::zero();
        double d_e = oracle_link_delay(w, from, to);
        acc_delay += d_e;
        double true_d = distance(w.pos[from], w.pos[to]);
        double est_d = path_loss_to_distance(distance_to_path_loss(true_d, w.cfg.ranging),
                                             w.cfg.ranging);
        double theta = w.cfg.metric.floors.theta_rad; // static: degenerate motion
        double tau = std::max(est_d * theta, w.cfg.metric.floors.tau_m);
        double speed = w.cfg.metric.floors.speed_mps;
        double xi = w.cfg.tx_range_m / (tau * acc_delay * speed);
        total += WideReal(xi / d_e).pow_int(cn) / WideReal(1.0);
    }
    return total;
}

/// Exhaustive max over every simple source->destination path along usable
/// links (in range and sharing at least one idle channel).
inline WideReal oracle_best_weight(const WorldView& w, NodeId source, NodeId dest,
                                   std::vector<NodeId>* best_path = nullptr) {
    WideReal best = WideReal::zero();
    std::vector<NodeId> path{source};
    std::vector<bool> used(w.cfg.node_count, false);
    used[source] = true;
    auto usable = [&](NodeId a, NodeId b) {
        return distance(w.pos[a], w.pos[b]) <= w.cfg.tx_range_m &&
               ChannelSet::common_count(w.idle[a], w.idle[b]) > 0;
    };
    std::function<void()> dfs = [&]() {
        NodeId at = path.back();
        if (at == dest) {
            WideReal wgt = oracle_path_weight(w, path);
            if (wgt > best) {
                best = wgt;
                if (best_path) *best_path = path;
            }
            return;
        }
        for (NodeId next = 0; next < static_cast<NodeId>(w.cfg.node_count); ++next) {
            if (used[next] || !usable(at, next)) continue;
            used[next] = true;
            path.push_back(next);
            dfs();
            path.pop_back();
            used[next] = false;
        }
    };
    dfs();
    return best;
}

} // namespace crvtest
