#pragma once

namespace samplepair {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace samplepair
