#include <cstdlib>
#include <string_view>

#include "theaitre/kernels.hpp"

namespace theaitre::kernels {

const KernelTable* avx2_table_if_compiled() noexcept;

namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() noexcept {
  const char* env = std::getenv("THEAITRE_KERNELS");
  const std::string_view choice = env ? env : "auto";
  if (choice == "scalar") return scalar_table();
  if (const auto* wide = avx2_table()) return *wide;
  return scalar_table();
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable* table = cpu_has_avx2() ? avx2_table_if_compiled() : nullptr;
  return table;
}

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace theaitre::kernels
