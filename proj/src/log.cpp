#include "hybridgen/log.hpp"

#include <cstdlib>
#include <string>

namespace hybridgen::log {

namespace {

Level parse_env() {
    const char* v = std::getenv("HYBRIDGEN_LOG");
    if (v == nullptr) {
        return Level::Warn;
    }
    const std::string s(v);
    if (s == "error") return Level::Error;
    if (s == "warn") return Level::Warn;
    if (s == "info") return Level::Info;
    if (s == "debug") return Level::Debug;
    return Level::Warn;
}

const char* tag(Level level) {
    switch (level) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}

} // namespace

Level threshold() {
    static const Level t = parse_env();
    return t;
}

void emit(Level level, std::string_view msg) {
    if (static_cast<int>(level) <= static_cast<int>(threshold())) {
        std::cerr << "[" << tag(level) << "] " << msg << "\n";
    }
}

} // namespace hybridgen::log
