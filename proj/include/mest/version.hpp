#pragma once

namespace mest {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mest
