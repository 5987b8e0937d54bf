#pragma once

namespace phasekit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kVersionStamp = "phasekit 0.1.0";

}  // namespace phasekit
