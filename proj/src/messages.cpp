#include "crv/messages.hpp"

#include <algorithm>
#include <set>

namespace crv {

const char* msg_kind_name(MsgKind kind) {
    switch (kind) {
        case MsgKind::RREQ: return "RREQ";
        case MsgKind::RREP: return "RREP";
        case MsgKind::RERR: return "RERR";
        case MsgKind::SQN_QUERY: return "SQN_QUERY";
        case MsgKind::SQN_REPORT: return "SQN_REPORT";
        case MsgKind::DATA: return "DATA";
    }
    return "?";
}

bool RouteEntry::contains_node(NodeId id) const {
    return std::find(path.begin(), path.end(), id) != path.end();
}

bool RouteEntry::contains_link(NodeId a, NodeId b) const {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if ((path[i] == a && path[i + 1] == b) || (path[i] == b && path[i + 1] == a)) {
            return true;
        }
    }
    return false;
}

void RouteTable::add(RouteEntry entry) {
    if (entry.path.size() < 2) {
        throw InvariantViolation("route entry must span at least two nodes");
    }
    std::set<NodeId> seen(entry.path.begin(), entry.path.end());
    if (seen.size() != entry.path.size()) {
        throw InvariantViolation("route entry path repeats a node");
    }
    if (entry.excluded && !entry.weight.is_zero()) {
        throw InvariantViolation("excluded route entry must carry zero weight");
    }
    entries_.push_back(std::move(entry));
}

int RouteTable::purge_link(NodeId a, NodeId b) {
    auto it = std::remove_if(entries_.begin(), entries_.end(),
                             [&](const RouteEntry& e) { return e.contains_link(a, b); });
    int removed = static_cast<int>(entries_.end() - it);
    entries_.erase(it, entries_.end());
    return removed;
}

int RouteTable::purge_node(NodeId id) {
    auto it = std::remove_if(entries_.begin(), entries_.end(),
                             [&](const RouteEntry& e) { return e.contains_node(id); });
    int removed = static_cast<int>(entries_.end() - it);
    entries_.erase(it, entries_.end());
    return removed;
}

int select_route_index(const RouteTable& table) {
    if (table.empty()) throw NoRouteError("route table is empty");
    int best = 0;
    WideReal best_weight = table.entry(0).weight;
    for (int i = 1; i < table.size(); ++i) {
        if (table.entry(i).weight > best_weight) { // strict: first maximum wins
            best_weight = table.entry(i).weight;
            best = i;
        }
    }
    return best;
}

const RouteEntry& select_route(const RouteTable& table) {
    return table.entry(select_route_index(table));
}

} // namespace crv
