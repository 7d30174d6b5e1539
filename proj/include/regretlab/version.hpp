#pragma once

namespace regretlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace regretlab
