#pragma once

#include <deque>
#include <map>
#include <set>

#include "crv/metric.hpp"
#include "crv/mobility.hpp"

namespace crv {

/// Per-observer reliability bookkeeping about other nodes: suspicion report
/// counts and the permanent frozen (malicious) set.
class ReliabilityLedger {
  public:
    int report_count(NodeId id) const {
        auto it = reports_.find(id);
        return it == reports_.end() ? 0 : it->second;
    }

    bool is_frozen(NodeId id) const { return frozen_.count(id) != 0; }

    ReliabilityFactor factor(NodeId id) const {
        if (is_frozen(id)) return ReliabilityFactor::infinite();
        return ReliabilityFactor::from_report_count(report_count(id));
    }

    void add_reports(NodeId id, int k) {
        if (k < 0) throw InvalidInput("report increment must be non-negative");
        if (k > 0) reports_[id] += k;
    }

    /// Freezing is permanent; there is no rehabilitation.
    void freeze(NodeId id) { frozen_.insert(id); }

    /// Vote quorum rule: suspect votes strictly exceeding half the queried
    /// participants mark the subject malicious.
    static bool quorum_exceeded(int suspect_votes, int queried) {
        return 2 * suspect_votes > queried;
    }

    /// Outcome of one suspicion round at a participant: either the subject is
    /// frozen, or every suspect report increments its report count.
    void apply_round(NodeId subject, int suspect_votes, int queried) {
        if (suspect_votes < 0 || queried < 0 || suspect_votes > queried) {
            throw InvalidInput("suspect votes must lie in [0, queried]");
        }
        if (quorum_exceeded(suspect_votes, queried)) {
            freeze(subject);
        } else {
            add_reports(subject, suspect_votes);
        }
    }

  private:
    std::map<NodeId, int> reports_;
    std::set<NodeId> frozen_;
};

/// Sliding window of forwarding observations about one neighbor; feeds the
/// suspicion trigger and the voting rule.
class ForwardWindow {
  public:
    explicit ForwardWindow(int capacity = 20) : capacity_(capacity) {}

    void record(bool forwarded) {
        outcomes_.push_back(forwarded);
        if (static_cast<int>(outcomes_.size()) > capacity_) outcomes_.pop_front();
    }

    int observations() const { return static_cast<int>(outcomes_.size()); }

    int drops() const {
        int n = 0;
        for (bool f : outcomes_) n += f ? 0 : 1;
        return n;
    }

    /// Drops strictly exceed the threshold fraction with at least min_obs
    /// observations on record.
    bool suspicious(double drop_threshold, int min_obs) const {
        if (observations() < min_obs || observations() == 0) return false;
        return static_cast<double>(drops()) >
               drop_threshold * static_cast<double>(observations());
    }

    void clear() { outcomes_.clear(); }

  private:
    int capacity_;
    std::deque<bool> outcomes_;
};

} // namespace crv
