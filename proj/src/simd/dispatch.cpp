#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ptaco/simd/kernels.hpp"

namespace ptaco::simd {

const KernelTable* avx2_table_if_built();
const KernelTable* neon_table_if_built();

const KernelTable* avx2_kernels() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return avx2_table_if_built();
  }
#endif
  return nullptr;
}

const KernelTable* neon_kernels() { return neon_table_if_built(); }

Isa detect_isa() {
  if (avx2_kernels() != nullptr) return Isa::kAvx2;
  if (neon_kernels() != nullptr) return Isa::kNeon;
  return Isa::kScalar;
}

namespace {

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar_kernels();
    case Isa::kAvx2:
      return avx2_kernels();
    case Isa::kNeon:
      return neon_kernels();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("PTACO_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels()) return avx2_kernels();
    if (want == "neon" && neon_kernels()) return neon_kernels();
  }
  return table_for(detect_isa());
}

const KernelTable*& active() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active(); }

void set_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) {
    throw std::runtime_error("kernel set '" + std::string(isa_name(isa)) +
                             "' is not available on this machine");
  }
  active() = table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

}  // namespace ptaco::simd
