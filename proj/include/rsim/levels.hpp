#pragma once

#include <array>
#include <string>

#include "rsim/common.hpp"

namespace rsim {

/// How far ahead of the predicted conflict the driver is alerted.
enum class WarningLevel { None, OneSecond, TwoSeconds };

/// Merging-driver behavior class at the roundabout entry.
enum class Aggressiveness { Low, Medium, High };

/// Ego driver's binary response once a warning (or the hazard itself) is seen.
enum class Decision { Stop, Go };

inline constexpr std::array<WarningLevel, 3> kAllWarningLevels = {WarningLevel::None, WarningLevel::OneSecond,
                                                                  WarningLevel::TwoSeconds};
inline constexpr std::array<Aggressiveness, 3> kAllAggressiveness = {Aggressiveness::Low, Aggressiveness::Medium,
                                                                     Aggressiveness::High};

inline const char* warning_level_name(WarningLevel w) {
    switch (w) {
        case WarningLevel::None: return "none";
        case WarningLevel::OneSecond: return "1s";
        case WarningLevel::TwoSeconds: return "2s";
    }
    return "?";
}

inline const char* aggressiveness_name(Aggressiveness a) {
    switch (a) {
        case Aggressiveness::Low: return "low";
        case Aggressiveness::Medium: return "medium";
        case Aggressiveness::High: return "high";
    }
    return "?";
}

inline const char* decision_name(Decision d) { return d == Decision::Go ? "go" : "stop"; }

inline WarningLevel parse_warning_level(const std::string& s) {
    if (s == "none") return WarningLevel::None;
    if (s == "1s") return WarningLevel::OneSecond;
    if (s == "2s") return WarningLevel::TwoSeconds;
    throw ParseError("unknown warning level '" + s + "' (expected none, 1s, or 2s)");
}

inline Aggressiveness parse_aggressiveness(const std::string& s) {
    if (s == "low") return Aggressiveness::Low;
    if (s == "medium") return Aggressiveness::Medium;
    if (s == "high") return Aggressiveness::High;
    throw ParseError("unknown aggressiveness '" + s + "' (expected low, medium, or high)");
}

inline Decision parse_decision(const std::string& s) {
    if (s == "stop") return Decision::Stop;
    if (s == "go") return Decision::Go;
    throw ParseError("unknown decision '" + s + "' (expected stop or go)");
}

/// Warning lead time in seconds; 0 for the unwarned condition.
inline double warning_lead_seconds(WarningLevel w) {
    switch (w) {
        case WarningLevel::None: return 0.0;
        case WarningLevel::OneSecond: return 1.0;
        case WarningLevel::TwoSeconds: return 2.0;
    }
    return 0.0;
}

}  // namespace rsim
