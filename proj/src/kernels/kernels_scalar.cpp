#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "exp_constants.hpp"
#include "theaitre/kernels.hpp"

namespace theaitre::kernels {

namespace {

using namespace detail;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void hash_logits(std::uint32_t seed, std::span<double> out) {
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto h = mix32(seed ^ (static_cast<std::uint32_t>(v) * kIndexStride));
    out[v] = static_cast<double>(h >> 8) * 0x1p-24;
  }
}

void scale(std::span<double> values, double factor) {
  for (double& v : values) v *= factor;
}

void mask_below(std::span<double> values, double threshold) {
  for (double& v : values) {
    if (v < threshold) v = kNegInf;
  }
}

double max_value(std::span<const double> values) {
  double best = kNegInf;
  for (double v : values) {
    if (v > best) best = v;
  }
  return best;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double exp_approx(double x) {
  if (x < kExpLo) return 0.0;
  x = std::fmin(x, kExpHi);
  const double fx = std::nearbyint(x * kLog2e);
  double r = std::fma(-fx, kLn2Hi, x);
  r = std::fma(-fx, kLn2Lo, r);
  double y = kPoly[0];
  for (int k = 1; k <= kPolyDegree; ++k) y = std::fma(y, r, kPoly[k]);
  const auto biased = std::bit_cast<std::uint64_t>(fx + (kShifter + 1023.0));
  return y * std::bit_cast<double>(biased << 52);
}

double exp_shifted(std::span<const double> in, double shift, std::span<double> out) {
  if (shift == kNegInf) {
    for (double& v : out) v = 0.0;
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = exp_approx(in[i] - shift);
    sum += out[i];
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr KernelTable kScalar{
    "scalar", &hash_logits, &scale, &mask_below, &max_value, &argmax, &exp_shifted, &dot,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace theaitre::kernels
