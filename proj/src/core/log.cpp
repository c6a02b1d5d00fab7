#include "core/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>

namespace e2i::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("E2I_LOG_LEVEL");
  if (!env) return Level::Info;
  const std::string v(env);
  if (v == "debug") return Level::Debug;
  if (v == "warn") return Level::Warn;
  if (v == "error") return Level::Error;
  if (v == "off") return Level::Off;
  return Level::Info;
}

std::atomic<Level> g_level{initial_level()};

void emit(Level l, const char* tag, const std::string& msg) {
  if (l < g_level.load()) return;
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void debug(const std::string& msg) { emit(Level::Debug, "debug", msg); }
void info(const std::string& msg) { emit(Level::Info, "info", msg); }
void warn(const std::string& msg) { emit(Level::Warn, "warn", msg); }
void error(const std::string& msg) { emit(Level::Error, "error", msg); }

}  // namespace e2i::log
