#pragma once

namespace geognn {
inline constexpr const char* kVersion = "0.1.0";
}
