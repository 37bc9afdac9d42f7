#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace pdnac::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level parse_level(std::string_view s) {
    if (s == "error") return Level::error;
    if (s == "warn") return Level::warn;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::warn;
}

/// Threshold read once from PDNAC_LOG_LEVEL (default warn).
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("PDNAC_LOG_LEVEL");
        return env ? parse_level(env) : Level::warn;
    }();
    return level;
}

inline void write(Level level, std::string_view msg) {
    if (static_cast<int>(level) > static_cast<int>(threshold())) return;
    static std::mutex mu;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[pdnac " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void error(std::string_view msg) { write(Level::error, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void debug(std::string_view msg) { write(Level::debug, msg); }

}  // namespace pdnac::log
