#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "crv/channels.hpp"
#include "crv/geom.hpp"
#include "crv/rng.hpp"

namespace crv {

/// Primary-user occupancy dynamics: every (cell, channel) pair runs an
/// independent ON/OFF process with exponential holding times.
struct PuParams {
    double mean_on_s = 5.0;
    double mean_off_s = 15.0;
    int grid_cells = 4;          // cells per axis; occupancy varies per cell
    double p_miss = 0.0;         // sensing miss probability (idle reported busy)
    double p_false_alarm = 0.0;  // busy reported idle

    bool valid() const {
        return mean_on_s > 0.0 && mean_off_s > 0.0 && grid_cells >= 1 && p_miss >= 0.0 &&
               p_miss <= 1.0 && p_false_alarm >= 0.0 && p_false_alarm <= 1.0;
    }
};

/// Ground-truth spectrum occupancy over a cell grid. Transition times are
/// drawn lazily per stream from seeded generators, so the whole trajectory is
/// a pure function of (params, seed).
class PuActivityModel {
  public:
    PuActivityModel(const PuParams& params, int num_channels, double area_side_m,
                    std::uint64_t seed);

    /// Apply every transition with time <= t. Must be called with
    /// non-decreasing t.
    void advance_to(double t);

    /// Time of the earliest pending transition.
    double next_transition_time() const;

    /// Idle channels a node at this position senses right now. Pure in
    /// (cell, current state, seed); the optional miss/false-alarm knobs are
    /// hash-derived so repeated calls agree.
    ChannelSet sense(const Position& pos, double t) const;

    int cell_of(const Position& pos) const;
    const ChannelSet& cell_idle(int cell) const { return idle_[cell]; }
    int num_cells() const { return static_cast<int>(idle_.size()); }
    double now() const { return time_; }

  private:
    struct Stream {
        bool on = false;
        double next_time = 0.0;
        Rng rng;
    };

    int stream_index(int cell, ChannelId ch) const { return cell * num_channels_ + ch; }
    void schedule(int idx);

    PuParams params_;
    int num_channels_;
    double area_side_m_;
    double cell_side_m_;
    std::uint64_t seed_;
    double time_ = 0.0;
    std::vector<Stream> streams_;
    std::vector<ChannelSet> idle_;
    // min-heap of (next_time, stream index); entries may be stale and are
    // validated against the stream on pop.
    using HeapEntry = std::pair<double, int>;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>> heap_;
};

} // namespace crv
