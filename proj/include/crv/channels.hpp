#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "crv/errors.hpp"

namespace crv {

/// Index of a channel inside the globally ordered channel group.
using ChannelId = int;

/// Set of idle channels at a node, over a fixed-size channel group.
class ChannelSet {
  public:
    ChannelSet() : n_(0) {}
    explicit ChannelSet(int num_channels) : n_(num_channels) {
        if (num_channels < 0) throw InvalidInput("channel count must be non-negative");
        words_.assign((num_channels + 63) / 64, 0);
    }

    int num_channels() const { return n_; }

    void set(ChannelId ch, bool idle) {
        check(ch);
        std::uint64_t bit = 1ULL << (ch & 63);
        if (idle) {
            words_[ch >> 6] |= bit;
        } else {
            words_[ch >> 6] &= ~bit;
        }
    }

    bool test(ChannelId ch) const {
        check(ch);
        return (words_[ch >> 6] >> (ch & 63)) & 1ULL;
    }

    int count() const {
        int total = 0;
        for (auto w : words_) total += std::popcount(w);
        return total;
    }

    /// Lowest idle channel, or -1 when the set is empty.
    ChannelId lowest() const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (words_[i]) return static_cast<ChannelId>(i * 64 + std::countr_zero(words_[i]));
        }
        return -1;
    }

    /// Lowest channel idle in both sets, or -1.
    ChannelId lowest_common(const ChannelSet& o) const {
        std::size_t n = std::min(words_.size(), o.words_.size());
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t w = words_[i] & o.words_[i];
            if (w) return static_cast<ChannelId>(i * 64 + std::countr_zero(w));
        }
        return -1;
    }

    bool operator==(const ChannelSet& o) const { return n_ == o.n_ && words_ == o.words_; }

    /// |a intersect b|.
    static int common_count(const ChannelSet& a, const ChannelSet& b) {
        std::size_t n = std::min(a.words_.size(), b.words_.size());
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) total += std::popcount(a.words_[i] & b.words_[i]);
        return total;
    }

  private:
    void check(ChannelId ch) const {
        if (ch < 0 || ch >= n_) throw InvalidInput("channel index out of range");
    }

    std::vector<std::uint64_t> words_;
    int n_;
};

inline int common_idle_count(const ChannelSet& a, const ChannelSet& b) {
    return ChannelSet::common_count(a, b);
}

/// Channel retune time: per-step delay times the index distance between the
/// current channel and the target channel in the channel group.
inline double switching_delay(ChannelId p, ChannelId q, double per_step_s) {
    if (per_step_s < 0.0) throw InvalidInput("per-step switching delay must be non-negative");
    return per_step_s * static_cast<double>(p > q ? p - q : q - p);
}

} // namespace crv
