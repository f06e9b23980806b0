#pragma once

namespace lqteam {

inline constexpr const char* kVersion = "0.1.0";

// Identifier of the fixed person-by-person perturbation battery. Bump when
// the battery composition or its constants change.
inline constexpr const char* kBatteryVersion = "pbp-battery-v1";

}  // namespace lqteam
