#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace helmstab::log {

enum class Level { info, warn };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level lvl, const std::string& msg) {
    std::cerr << (lvl == Level::warn ? "[warn] " : "[info] ") << msg << '\n';
  };
  return s;
}
}  // namespace detail

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::sink_mutex());
  return std::exchange(detail::sink(), std::move(s));
}

template <typename... Args>
void write(Level lvl, Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  std::lock_guard lock(detail::sink_mutex());
  if (detail::sink()) detail::sink()(lvl, os.str());
}

template <typename... Args>
void info(Args&&... args) {
  write(Level::info, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(Args&&... args) {
  write(Level::warn, std::forward<Args>(args)...);
}

/// Captures messages for the lifetime of the object (tests).
class ScopedCapture {
 public:
  ScopedCapture()
      : previous_(set_sink([this](Level lvl, const std::string& m) {
          (lvl == Level::warn ? warnings : infos).push_back(m);
        })) {}
  ~ScopedCapture() { set_sink(std::move(previous_)); }
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

  std::vector<std::string> warnings;
  std::vector<std::string> infos;

 private:
  Sink previous_;
};

}  // namespace helmstab::log
