#pragma once

// Line-delimited JSON events (progress, warnings) with a replaceable sink.

#include <functional>
#include <json.hpp>
#include <string>

namespace ispw::events {

using Sink = std::function<void(const nlohmann::json&)>;

/// Writes one compact JSON object per line to stderr unless replaced.
void set_sink(Sink sink);
/// Restores the stderr sink.
void reset_sink();
void emit(const nlohmann::json& event);
/// {"event":"warning","what":...,"detail":...}
void warn(const std::string& what, const std::string& detail);

/// Installs a sink for the lifetime of the guard.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink);
  ~ScopedSink();
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace ispw::events
