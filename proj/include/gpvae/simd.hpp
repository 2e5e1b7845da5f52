#pragma once
// Dense inner-loop kernels used by the tensor ops.
//
// Every kernel has a scalar reference implementation and an AVX2+FMA variant.
// The variant is chosen once at startup from CPUID; GPVAE_SIMD=scalar in the
// environment (or force_isa) pins the scalar path. Both paths are
// deterministic for a fixed ISA, but they do not round identically because
// the vector path reassociates sums and uses fused multiply-add.

#include <cstddef>
#include <span>
#include <string_view>

namespace gpvae::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Row-major GEMM variants. All accumulate: C += op(A) * op(B).
///   gemm_nn: A is m x k, B is k x n, C is m x n
///   gemm_nt: A is m x k, B is n x k (B transposed), C is m x n
///   gemm_tn: A is k x m (A transposed), B is k x n, C is m x n
struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // gx[i] += x[i] > 0 ? gy[i] : 0
  void (*relu_backward)(const double* x, const double* gy, double* gx,
                        std::size_t n);
};

const KernelTable& scalar_kernels();
/// Null when the binary was built for a target without AVX2 support.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

/// Currently active table.
const KernelTable& kernels();
Isa active_isa();
/// Falls back to scalar when the requested ISA is unavailable; returns the
/// ISA actually selected.
Isa force_isa(Isa isa);

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace gpvae::simd
