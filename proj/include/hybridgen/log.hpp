#pragma once

#include <iostream>
#include <string_view>

namespace hybridgen::log {

enum class Level : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Threshold comes from the HYBRIDGEN_LOG env var (error|warn|info|debug),
// read once. Default is warn. All output goes to stderr so it never
// contaminates CSV/JSON results on stdout.
Level threshold();

void emit(Level level, std::string_view msg);

inline void error(std::string_view msg) { emit(Level::Error, msg); }
inline void warn(std::string_view msg) { emit(Level::Warn, msg); }
inline void info(std::string_view msg) { emit(Level::Info, msg); }
inline void debug(std::string_view msg) { emit(Level::Debug, msg); }

} // namespace hybridgen::log
