#pragma once

namespace nbmc {

inline constexpr const char* kToolVersion = "nbmc 1.0.0";

}  // namespace nbmc
