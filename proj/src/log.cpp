#include "wsp/log.hpp"

#include <atomic>
#include <cstdio>

namespace wsp::log {

namespace {
std::atomic<Level> g_level{Level::quiet};
}

void set_level(Level level) { g_level = level; }

void info(std::string_view message) {
  if (g_level.load() != Level::info) return;
  std::fprintf(stderr, "[wspalign] %.*s\n", static_cast<int>(message.size()), message.data());
}

}  // namespace wsp::log
