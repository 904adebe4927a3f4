#pragma once

namespace vpcb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vpcb
