#pragma once

namespace saddle {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace saddle
