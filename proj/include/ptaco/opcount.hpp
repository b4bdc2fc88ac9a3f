#pragma once

#include <cstdint>

namespace ptaco::opcount {

// Multiply-adds performed by forward contractions (matmul, conv1d,
// lightweight_conv). Backward passes are not counted.
std::uint64_t macs();
void reset();
void add(std::uint64_t n);

}  // namespace ptaco::opcount
