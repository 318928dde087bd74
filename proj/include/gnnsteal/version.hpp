#pragma once

namespace gnnsteal {
inline constexpr const char* kVersion = "0.1.0";
}
