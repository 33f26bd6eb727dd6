#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace gram {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Verbosity comes from the GRAM_LOG environment variable: error, info, debug.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("GRAM_LOG");
        if (env == nullptr) return LogLevel::info;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

inline void log_msg(LogLevel lvl, const std::string& msg) {
    if (lvl > log_level()) return;
    const char* tag = lvl == LogLevel::error ? "error" : lvl == LogLevel::info ? "info" : "debug";
    std::fprintf(stderr, "[gram %s] %s\n", tag, msg.c_str());
}

inline void log_error(const std::string& msg) { log_msg(LogLevel::error, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::debug, msg); }

}  // namespace gram
