#include "crv/pu_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "crv/errors.hpp"

namespace crv {

PuActivityModel::PuActivityModel(const PuParams& params, int num_channels, double area_side_m,
                                 std::uint64_t seed)
    : params_(params), num_channels_(num_channels), area_side_m_(area_side_m), seed_(seed) {
    if (!params_.valid()) throw InvalidInput("invalid PU activity parameters");
    if (num_channels_ < 0) throw InvalidInput("channel count must be non-negative");
    if (area_side_m_ <= 0.0) throw InvalidInput("area side must be positive");

    int cells = params_.grid_cells * params_.grid_cells;
    cell_side_m_ = area_side_m_ / params_.grid_cells;
    idle_.assign(cells, ChannelSet(num_channels_));
    streams_.resize(static_cast<std::size_t>(cells) * num_channels_);

    const double p_on = params_.mean_on_s / (params_.mean_on_s + params_.mean_off_s);
    for (int c = 0; c < cells; ++c) {
        for (ChannelId ch = 0; ch < num_channels_; ++ch) {
            int idx = stream_index(c, ch);
            Stream& s = streams_[idx];
            s.rng = Rng(mix_seed(seed_, 0x70755f5354ULL + static_cast<std::uint64_t>(idx)));
            s.on = s.rng.uniform() < p_on;
            idle_[c].set(ch, !s.on);
            schedule(idx);
        }
    }
}

void PuActivityModel::schedule(int idx) {
    Stream& s = streams_[idx];
    double hold = s.rng.exponential(s.on ? params_.mean_on_s : params_.mean_off_s);
    s.next_time = time_ + hold;
    heap_.push({s.next_time, idx});
}

void PuActivityModel::advance_to(double t) {
    if (t < time_) throw InvalidInput("PU model cannot rewind");
    while (!heap_.empty() && heap_.top().first <= t) {
        auto [when, idx] = heap_.top();
        heap_.pop();
        Stream& s = streams_[idx];
        if (s.next_time != when) continue; // stale heap entry
        time_ = when;
        s.on = !s.on;
        int cell = idx / num_channels_;
        ChannelId ch = idx % num_channels_;
        idle_[cell].set(ch, !s.on);
        schedule(idx);
    }
    time_ = t;
}

double PuActivityModel::next_transition_time() const {
    if (heap_.empty()) return std::numeric_limits<double>::infinity();
    return heap_.top().first;
}

int PuActivityModel::cell_of(const Position& pos) const {
    int gx = std::min(params_.grid_cells - 1,
                      std::max(0, static_cast<int>(pos.x / cell_side_m_)));
    int gy = std::min(params_.grid_cells - 1,
                      std::max(0, static_cast<int>(pos.y / cell_side_m_)));
    return gy * params_.grid_cells + gx;
}

ChannelSet PuActivityModel::sense(const Position& pos, double t) const {
    int cell = cell_of(pos);
    ChannelSet out = idle_[cell];
    if (params_.p_miss == 0.0 && params_.p_false_alarm == 0.0) {
        return out;
    }
    // Deterministic per-(cell, channel, time) sensing error.
    std::uint64_t tbits;
    static_assert(sizeof(tbits) == sizeof(t));
    std::memcpy(&tbits, &t, sizeof(tbits));
    for (ChannelId ch = 0; ch < num_channels_; ++ch) {
        std::uint64_t h = mix_seed(seed_ ^ tbits, 0x73656e7365ULL + cell * 131071ULL + ch);
        double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (out.test(ch)) {
            if (u < params_.p_miss) out.set(ch, false);
        } else {
            if (u < params_.p_false_alarm) out.set(ch, true);
        }
    }
    return out;
}

} // namespace crv
