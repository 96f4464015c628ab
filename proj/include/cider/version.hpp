#pragma once

namespace cider {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace cider
