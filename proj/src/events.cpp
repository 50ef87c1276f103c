#include "ispw/events.hpp"

#include <iostream>
#include <mutex>

namespace ispw::events {

namespace {

void stderr_sink(const nlohmann::json& e) { std::cerr << e.dump() << '\n'; }

std::mutex& lock() {
  static std::mutex m;
  return m;
}

Sink& current() {
  static Sink s = stderr_sink;
  return s;
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard g(lock());
  current() = sink ? std::move(sink) : Sink(stderr_sink);
}

void reset_sink() { set_sink(stderr_sink); }

void emit(const nlohmann::json& event) {
  std::lock_guard g(lock());
  current()(event);
}

void warn(const std::string& what, const std::string& detail) {
  emit({{"event", "warning"}, {"what", what}, {"detail", detail}});
}

ScopedSink::ScopedSink(Sink sink) {
  std::lock_guard g(lock());
  previous_ = current();
  current() = std::move(sink);
}

ScopedSink::~ScopedSink() {
  std::lock_guard g(lock());
  current() = std::move(previous_);
}

}  // namespace ispw::events
