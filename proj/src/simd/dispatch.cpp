#include <atomic>
#include <cstdlib>

#include "tables.hpp"
#include "tsal/error.hpp"

namespace tsal::simd {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  return std::nullopt;
}

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return &detail::scalar_table;
    case Isa::Avx2:
#if defined(TSAL_BUILD_AVX2)
      if (__builtin_cpu_supports("avx2")) return &detail::avx2_table;
#endif
      return nullptr;
    case Isa::Neon:
#if defined(TSAL_BUILD_NEON)
      return &detail::neon_table;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

bool isa_available(Isa isa) noexcept { return table_for(isa) != nullptr; }

namespace {

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("TSAL_SIMD")) {
    if (auto isa = parse_isa(env)) {
      if (const KernelTable* t = table_for(*isa)) return t;
    }
  }
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (const KernelTable* t = table_for(isa)) return t;
  }
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& kernels() noexcept { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() noexcept { return kernels().isa; }

void select_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) {
    throw Error(Errc::InvalidArgument,
                "SIMD variant '" + std::string(isa_name(isa)) + "' is not available on this CPU");
  }
  active_slot().store(t, std::memory_order_release);
}

}  // namespace tsal::simd
