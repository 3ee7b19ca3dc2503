#pragma once

#define SSDIAG_VERSION_STRING "0.1.0"

namespace ssdiag {
inline constexpr const char* kVersion = SSDIAG_VERSION_STRING;
}
