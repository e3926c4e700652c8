#pragma once

namespace muchapro {
inline constexpr const char* kVersion = "1.0.0";
}
