#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace tsal::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

/// Inner-loop kernels over contiguous double arrays. Every variant keeps the
/// per-element operation order of the scalar table, so axpy/add/mul/scale are
/// bit-identical across variants. dot and sum use lane-parallel partial sums
/// and agree with the scalar table to within ~n ulps.
struct KernelTable {
  Isa isa;
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
};

/// Table for a specific ISA; nullptr if not compiled in or not supported by
/// the running CPU.
const KernelTable* table_for(Isa isa) noexcept;

bool isa_available(Isa isa) noexcept;

/// Currently selected table. Chosen on first use: $TSAL_SIMD if set
/// (scalar|avx2|neon), otherwise the widest ISA the CPU supports.
const KernelTable& kernels() noexcept;

Isa active_isa() noexcept;

/// Switches the active table. Throws Errc::InvalidArgument if unavailable.
void select_isa(Isa isa);

/// RAII override of the active ISA, restoring the previous one on exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { select_isa(isa); }
  ~ScopedIsa() { select_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace tsal::simd
