#pragma once

namespace polymoe {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace polymoe
