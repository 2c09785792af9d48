#pragma once

namespace nlsd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nlsd
