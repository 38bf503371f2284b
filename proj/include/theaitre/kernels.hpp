#pragma once

// Data-parallel inner loops over logit vectors and dense rows.
//
// Every kernel has a scalar reference and, where the build target allows,
// an AVX2 variant. The active table is chosen once at first use from the CPU
// feature set; THEAITRE_KERNELS=scalar|avx2|auto overrides the choice.
//
// hash_logits, scale, mask_below, max_value, argmax and exp_shifted are
// bit-identical across variants. exp_shifted's returned sum and dot are
// reductions whose summation order differs; they agree to rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace theaitre::kernels {

struct KernelTable {
  std::string_view name;

  /// out[v] = mix(seed, v) mapped to [0, 1) with 24-bit resolution.
  void (*hash_logits)(std::uint32_t seed, std::span<double> out);
  void (*scale)(std::span<double> values, double factor);
  /// values[i] < threshold -> -inf.
  void (*mask_below)(std::span<double> values, double threshold);
  /// -inf for an empty span or when every entry is -inf.
  double (*max_value)(std::span<const double> values);
  /// First index of the maximum. values must be non-empty.
  std::size_t (*argmax)(std::span<const double> values);
  /// out[i] = exp(in[i] - shift), exactly 0 for -inf inputs. Returns sum(out).
  double (*exp_shifted)(std::span<const double> in, double shift, std::span<double> out);
  double (*dot)(std::span<const double> a, std::span<const double> b);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when AVX2/FMA are not compiled in or the CPU lacks them.
const KernelTable* avx2_table() noexcept;

/// The dispatched table.
const KernelTable& active() noexcept;

/// Shared by both variants so the hash is reproducible everywhere.
constexpr std::uint32_t mix32(std::uint32_t h) noexcept {
  h ^= h >> 16;
  h *= 0x7feb352dU;
  h ^= h >> 15;
  h *= 0x846ca68bU;
  h ^= h >> 16;
  return h;
}

constexpr std::uint32_t kIndexStride = 0x9E3779B1U;

}  // namespace theaitre::kernels
