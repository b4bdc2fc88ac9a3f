#pragma once
// Parameter checkpoints.
//
// Layout (all integers little-endian):
//   8 bytes   magic "PTACOCKP"
//   1 byte    format version (kCheckpointVersion)
//   records until end of file, each:
//     u32        name length L
//     L bytes    name (UTF-8, no terminator)
//     u32        rank R
//     R x u64    extents
//     prod x f64 values, row-major
// A record that ends early is reported as truncation.

#include <cstdint>
#include <string>
#include <vector>

#include "ptaco/parameter.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco {

inline constexpr char kCheckpointMagic[] = "PTACOCKP";
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_checkpoint(std::vector<unsigned char> bytes);

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

std::vector<NamedTensor> snapshot(const ParameterStore& store);
// Copies values into same-named parameters. Every store parameter must be
// present with a matching shape; extra records are ignored.
void restore(ParameterStore& store, const std::vector<NamedTensor>& records);

}  // namespace ptaco
