#pragma once

namespace polyadapt {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace polyadapt
