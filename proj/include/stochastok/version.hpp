#pragma once

namespace stochastok {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stochastok
