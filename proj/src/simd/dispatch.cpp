#include <atomic>
#include <cstdlib>
#include <string>

#include "gpvae/simd.hpp"

namespace gpvae::simd {
namespace {

const KernelTable* select_default() {
  if (const char* env = std::getenv("GPVAE_SIMD"); env && std::string(env) == "scalar")
    return &scalar_kernels();
  if (cpu_has_avx2() && avx2_kernels() != nullptr) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

Isa active_isa() { return kernels().isa; }

Isa force_isa(Isa isa) {
  const KernelTable* table = &scalar_kernels();
  if (isa == Isa::Avx2 && cpu_has_avx2() && avx2_kernels() != nullptr) table = avx2_kernels();
  active().store(table, std::memory_order_relaxed);
  return table->isa;
}

}  // namespace gpvae::simd
