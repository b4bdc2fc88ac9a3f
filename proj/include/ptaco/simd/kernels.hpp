#pragma once
// Inner-loop kernels used by the tensor engine.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, a vectorized variant (AVX2+FMA on x86-64, NEON on AArch64).
// The active table is chosen once at startup from CPU feature detection and
// can be overridden with PTACO_SIMD=scalar or set_isa().

#include <cstddef>
#include <string_view>

namespace ptaco::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  // y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // sum_i x[i] * y[i]
  double (*dot)(std::size_t n, const double* x, const double* y);
  // sum_i x[i]
  double (*sum)(std::size_t n, const double* x);
  // out[i] = a[i] + b[i]
  void (*add)(std::size_t n, const double* a, const double* b, double* out);
  // out[i] = a[i] * b[i]
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
  // y[i] += a[i] * b[i]
  void (*mul_acc)(std::size_t n, const double* a, const double* b, double* y);
  // C[m,n] (+)= op(A) * op(B), all row-major and densely packed.
  // op(A) is [m,k]; when trans_a the storage of A is [k,m].
  // op(B) is [k,n]; when trans_b the storage of B is [n,k].
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               bool trans_a, const double* b, bool trans_b, double* c,
               bool accumulate);
};

const KernelTable& scalar_kernels();
// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table every tensor op goes through.
const KernelTable& kernels();

// Forces a specific table; throws std::runtime_error when unavailable.
void set_isa(Isa isa);
// Best table supported by this machine.
Isa detect_isa();

std::string_view isa_name(Isa isa);

}  // namespace ptaco::simd
