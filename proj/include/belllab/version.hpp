#pragma once

namespace belllab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace belllab
