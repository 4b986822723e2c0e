#pragma once

namespace confaudit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace confaudit
