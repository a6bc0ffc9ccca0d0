#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crv/geom.hpp"
#include "crv/mobility.hpp"

namespace crv {

struct GreedyCandidate {
    NodeId id;
    Position pos;
};

/// Position-only forwarding baseline: pick the candidate geographically
/// closest to the destination and strictly closer than the current node.
/// Returns nullopt at a local maximum (packet is dropped there).
std::optional<NodeId> greedy_next_hop(const Position& self, const Position& dest,
                                      std::span<const GreedyCandidate> candidates);

} // namespace crv
