#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "metagen/simd/kernels.hpp"

namespace metagen::simd {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable* table_ptr(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return detail::scalar_table();
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  Isa isa = detected_isa();
  if (const char* env = std::getenv("METAGEN_ISA")) {
    std::string name(env);
    if (name == "scalar") isa = Isa::scalar;
    else if (name == "avx2" && cpu_supports(Isa::avx2)) isa = Isa::avx2;
    else if (name == "neon" && cpu_supports(Isa::neon)) isa = Isa::neon;
  }
  return table_ptr(isa);
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa detected_isa() {
  if (cpu_supports(Isa::avx2)) return Isa::avx2;
  if (cpu_supports(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::scalar};
  for (Isa isa : {Isa::avx2, Isa::neon})
    if (cpu_supports(isa)) out.push_back(isa);
  return out;
}

const KernelTable& kernels_for(Isa isa) {
  if (!cpu_supports(isa))
    throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
  return *table_ptr(isa);
}

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) { active().store(&kernels_for(isa), std::memory_order_relaxed); }

}  // namespace metagen::simd
