#pragma once

#include <ostream>

#include <json.hpp>

namespace crv {

/// Optional line-delimited JSON event log. One object per line; disabled
/// sinks cost a branch per call site.
class TraceSink {
  public:
    TraceSink() : out_(nullptr) {}
    explicit TraceSink(std::ostream& out) : out_(&out) {}

    bool enabled() const { return out_ != nullptr; }

    void emit(const nlohmann::json& record) {
        if (out_) *out_ << record.dump() << '\n';
    }

  private:
    std::ostream* out_;
};

} // namespace crv
