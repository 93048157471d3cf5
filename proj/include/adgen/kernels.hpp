#pragma once

// Dense double-precision inner loops used by the autograd ops.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The active table is chosen once at first use from the CPU
// features (override with ADGEN_KERNELS=scalar|avx2) and can be switched
// explicitly for equivalence tests. Matrices are row-major and dense.

#include <cstddef>
#include <string_view>

namespace adgen::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  // C[m×n] (+)= A[m×k] · B[k×n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // C[m×n] (+)= A[m×k] · B[n×k]ᵀ
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // C[m×n] (+)= A[k×m]ᵀ · B[k×n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha · x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// Null when the build or the host CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

bool cpu_supports_avx2() noexcept;

const KernelTable& active() noexcept;

// Returns false (and leaves the active table unchanged) if the backend is
// unavailable on this host.
bool select(Backend backend) noexcept;

std::string_view backend_name(Backend backend) noexcept;

}  // namespace adgen::kernels
