#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace caum {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2 };

// CAUM_LOG=debug|info|warn, default info.
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("CAUM_LOG");
        if (env && std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        if (env && std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        return LogLevel::Info;
    }();
    return level;
}

inline void log_at(LogLevel lvl, const char* tag, const char* fmt, std::va_list ap) {
    if (lvl < log_level()) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::vfprintf(stderr, fmt, ap);
    std::fprintf(stderr, "\n");
}

inline void log_debug(const char* fmt, ...) {
    std::va_list ap;
    va_start(ap, fmt);
    log_at(LogLevel::Debug, "debug", fmt, ap);
    va_end(ap);
}

inline void log_info(const char* fmt, ...) {
    std::va_list ap;
    va_start(ap, fmt);
    log_at(LogLevel::Info, "info", fmt, ap);
    va_end(ap);
}

inline void log_warn(const char* fmt, ...) {
    std::va_list ap;
    va_start(ap, fmt);
    log_at(LogLevel::Warn, "warn", fmt, ap);
    va_end(ap);
}

} // namespace caum
