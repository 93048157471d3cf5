#include <atomic>
#include <cstdlib>
#include <string_view>

#include "adgen/kernels.hpp"

namespace adgen::kernels {

namespace detail {
const KernelTable* avx2_table_unchecked() noexcept;
}

bool cpu_supports_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* avx2_table() noexcept {
  static const bool supported = cpu_supports_avx2();
  return supported ? detail::avx2_table_unchecked() : nullptr;
}

namespace {

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("ADGEN_KERNELS");
  const std::string_view choice = env != nullptr ? env : "auto";
  if (choice == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool select(Backend backend) noexcept {
  const KernelTable* t = backend == Backend::Scalar ? &scalar_table() : avx2_table();
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::Scalar ? "scalar" : "avx2";
}

}  // namespace adgen::kernels
