#include "crv/routing.hpp"

namespace crv {

std::optional<NodeId> greedy_next_hop(const Position& self, const Position& dest,
                                      std::span<const GreedyCandidate> candidates) {
    double self_dist = distance(self, dest);
    std::optional<NodeId> best;
    double best_dist = self_dist;
    for (const auto& c : candidates) {
        double d = distance(c.pos, dest);
        if (d < best_dist) { // strict improvement required
            best_dist = d;
            best = c.id;
        }
    }
    return best;
}

} // namespace crv
