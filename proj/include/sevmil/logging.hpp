#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace sevmil {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

// Level comes from SEVMIL_LOG (debug|info|warn|error); default warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SEVMIL_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    const std::string v(env);
    if (v == "debug") return LogLevel::kDebug;
    if (v == "info") return LogLevel::kInfo;
    if (v == "error") return LogLevel::kError;
    return LogLevel::kWarn;
  }();
  return level;
}

inline void log(LogLevel level, const std::string& message) {
  if (level < log_level()) return;
  const char* tag = "warn";
  switch (level) {
    case LogLevel::kDebug: tag = "debug"; break;
    case LogLevel::kInfo: tag = "info"; break;
    case LogLevel::kWarn: tag = "warn"; break;
    case LogLevel::kError: tag = "error"; break;
  }
  std::cerr << "[sevmil:" << tag << "] " << message << "\n";
}

inline void log_debug(const std::string& m) { log(LogLevel::kDebug, m); }
inline void log_info(const std::string& m) { log(LogLevel::kInfo, m); }
inline void log_warn(const std::string& m) { log(LogLevel::kWarn, m); }
inline void log_error(const std::string& m) { log(LogLevel::kError, m); }

}  // namespace sevmil
