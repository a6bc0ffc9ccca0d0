#pragma once

#include <cstdint>
#include <queue>
#include <variant>
#include <vector>

#include "crv/messages.hpp"
#include "crv/mobility.hpp"

namespace crv {

enum class EventKind {
    message_delivery,
    mobility_step,
    pu_transition,
    traffic_emit,
    discovery_timeout,
    metrics_sample,
};

struct ControlDelivery {
    NodeId from = 0;
    NodeId to = 0;
    ControlMessage msg;
};

struct DataDelivery {
    NodeId from = 0;
    NodeId to = 0;
    std::uint64_t packet_id = 0;
};

struct MobilityStep {};
struct PuTransition {};

struct TrafficEmit {
    int flow = 0;
};

/// Discovery collection window closing at the source.
struct DiscoveryDeadline {
    int flow = 0;
    std::uint32_t seq = 0;
};

/// Vote collection window closing at a suspicion-round initiator.
struct SuspicionDeadline {
    NodeId initiator = 0;
    std::uint32_t round = 0;
};

/// One-shot probe re-attempting discovery after a failed round's back-off.
struct DiscoveryRetry {
    int flow = 0;
};

/// Scenario-scripted freeze firing at its configured time.
struct FreezeInjection {
    NodeId observer = 0;
    NodeId subject = 0;
};

struct MetricsSample {};

using EventPayload = std::variant<ControlDelivery, DataDelivery, MobilityStep, PuTransition,
                                  TrafficEmit, DiscoveryDeadline, SuspicionDeadline,
                                  DiscoveryRetry, FreezeInjection, MetricsSample>;

struct Event {
    double time = 0.0;
    std::uint64_t seq = 0; // insertion order; breaks time ties
    EventKind kind = EventKind::message_delivery;
    EventPayload payload;
};

/// Min-heap on (time, seq). Events at equal times dispatch in insertion
/// order, which keeps runs reproducible.
class EventQueue {
  public:
    void push(double time, EventKind kind, EventPayload payload) {
        heap_.push(Event{time, next_seq_++, kind, std::move(payload)});
    }

    bool empty() const { return heap_.empty(); }
    const Event& top() const { return heap_.top(); }

    Event pop() {
        Event e = heap_.top();
        heap_.pop();
        return e;
    }

    std::size_t size() const { return heap_.size(); }

  private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

} // namespace crv
