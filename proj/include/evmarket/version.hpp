#pragma once

namespace evmarket {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace evmarket
