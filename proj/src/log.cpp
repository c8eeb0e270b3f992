#include "selmut/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace selmut::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;

const char* tag(Level l) {
  switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    default: return "";
  }
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level l, std::string_view component, std::string_view message) {
  if (static_cast<int>(l) < static_cast<int>(g_level.load())) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::clog << "[selmut:" << tag(l) << "] " << component << ": " << message << '\n';
}

}  // namespace selmut::log
