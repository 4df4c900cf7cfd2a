#pragma once

namespace cqdsim {
inline constexpr const char* version = "0.1.0";
}
