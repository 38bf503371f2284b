// AVX2 + FMA variants. Functions carry target attributes rather than the TU
// being built with -mavx2, so nothing here leaks wide instructions into
// inline code shared with the rest of the library.

#include "theaitre/kernels.hpp"

#if defined(THEAITRE_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <limits>

#include "exp_constants.hpp"

#define THEAITRE_AVX2 __attribute__((target("avx2,fma")))

namespace theaitre::kernels {

namespace {

using namespace detail;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kLanes = 4;

THEAITRE_AVX2 inline __m256i mix32_x8(__m256i h) {
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
  h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0x7feb352dU)));
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 15));
  h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0x846ca68bU)));
  h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
  return h;
}

THEAITRE_AVX2 void hash_logits(std::uint32_t seed, std::span<double> out) {
  const __m256i vseed = _mm256_set1_epi32(static_cast<int>(seed));
  const __m256i stride = _mm256_set1_epi32(static_cast<int>(kIndexStride));
  __m256i idx = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i step = _mm256_set1_epi32(8);
  const __m256d unit = _mm256_set1_pd(0x1p-24);
  std::size_t v = 0;
  const std::size_t n = out.size();
  for (; v + 8 <= n; v += 8) {
    __m256i h = _mm256_xor_si256(vseed, _mm256_mullo_epi32(idx, stride));
    h = _mm256_srli_epi32(mix32_x8(h), 8);
    const __m256d lo = _mm256_cvtepi32_pd(_mm256_castsi256_si128(h));
    const __m256d hi = _mm256_cvtepi32_pd(_mm256_extracti128_si256(h, 1));
    _mm256_storeu_pd(out.data() + v, _mm256_mul_pd(lo, unit));
    _mm256_storeu_pd(out.data() + v + 4, _mm256_mul_pd(hi, unit));
    idx = _mm256_add_epi32(idx, step);
  }
  for (; v < n; ++v) {
    const auto h = mix32(seed ^ (static_cast<std::uint32_t>(v) * kIndexStride));
    out[v] = static_cast<double>(h >> 8) * 0x1p-24;
  }
}

THEAITRE_AVX2 void scale(std::span<double> values, double factor) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + kLanes <= values.size(); i += kLanes) {
    _mm256_storeu_pd(values.data() + i, _mm256_mul_pd(_mm256_loadu_pd(values.data() + i), f));
  }
  for (; i < values.size(); ++i) values[i] *= factor;
}

THEAITRE_AVX2 void mask_below(std::span<double> values, double threshold) {
  const __m256d t = _mm256_set1_pd(threshold);
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  std::size_t i = 0;
  for (; i + kLanes <= values.size(); i += kLanes) {
    const __m256d v = _mm256_loadu_pd(values.data() + i);
    const __m256d below = _mm256_cmp_pd(v, t, _CMP_LT_OQ);
    _mm256_storeu_pd(values.data() + i, _mm256_blendv_pd(v, ninf, below));
  }
  for (; i < values.size(); ++i) {
    if (values[i] < threshold) values[i] = kNegInf;
  }
}

THEAITRE_AVX2 double max_value(std::span<const double> values) {
  __m256d best = _mm256_set1_pd(kNegInf);
  std::size_t i = 0;
  for (; i + kLanes <= values.size(); i += kLanes) {
    best = _mm256_max_pd(best, _mm256_loadu_pd(values.data() + i));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, best);
  double m = kNegInf;
  for (double v : lanes) m = v > m ? v : m;
  for (; i < values.size(); ++i) m = values[i] > m ? values[i] : m;
  return m;
}

THEAITRE_AVX2 std::size_t argmax(std::span<const double> values) {
  const double m = max_value(values);
  const __m256d target = _mm256_set1_pd(m);
  std::size_t i = 0;
  for (; i + kLanes <= values.size(); i += kLanes) {
    const int hits = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(values.data() + i), target, _CMP_EQ_OQ));
    if (hits) return i + static_cast<std::size_t>(__builtin_ctz(static_cast<unsigned>(hits)));
  }
  for (; i < values.size(); ++i) {
    if (values[i] == m) return i;
  }
  return 0;
}

THEAITRE_AVX2 inline __m256d exp_x4(__m256d x) {
  const __m256d flush = _mm256_cmp_pd(x, _mm256_set1_pd(kExpLo), _CMP_LT_OQ);
  x = _mm256_min_pd(x, _mm256_set1_pd(kExpHi));
  // Flushed lanes get x = 0 so the exponent construction stays in range.
  x = _mm256_blendv_pd(x, _mm256_setzero_pd(), flush);
  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(kLn2Lo), r);
  __m256d y = _mm256_set1_pd(kPoly[0]);
  for (int k = 1; k <= kPolyDegree; ++k) y = _mm256_fmadd_pd(y, r, _mm256_set1_pd(kPoly[k]));
  const __m256d biased = _mm256_add_pd(fx, _mm256_set1_pd(kShifter + 1023.0));
  const __m256d pow2n = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_castpd_si256(biased), 52));
  return _mm256_blendv_pd(_mm256_mul_pd(y, pow2n), _mm256_setzero_pd(), flush);
}

THEAITRE_AVX2 double exp_shifted(std::span<const double> in, double shift, std::span<double> out) {
  if (shift == kNegInf) {
    std::fill(out.begin(), out.end(), 0.0);
    return 0.0;
  }
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = in.size();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d e = exp_x4(_mm256_sub_pd(_mm256_loadu_pd(in.data() + i), s));
    _mm256_storeu_pd(out.data() + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  if (i < n) {
    // Pad with -inf: exp contributes exactly zero to the sum.
    alignas(32) double src[kLanes];
    alignas(32) double dst[kLanes];
    std::fill(std::begin(src), std::end(src), kNegInf);
    std::memcpy(src, in.data() + i, (n - i) * sizeof(double));
    const __m256d e = exp_x4(_mm256_sub_pd(_mm256_load_pd(src), s));
    _mm256_store_pd(dst, e);
    acc = _mm256_add_pd(acc, e);
    std::memcpy(out.data() + i, dst, (n - i) * sizeof(double));
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

THEAITRE_AVX2 double dot(std::span<const double> a, std::span<const double> b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= a.size(); i += kLanes) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc);
  }
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr KernelTable kAvx2{
    "avx2", &hash_logits, &scale, &mask_below, &max_value, &argmax, &exp_shifted, &dot,
};

}  // namespace

const KernelTable* avx2_table_if_compiled() noexcept { return &kAvx2; }

}  // namespace theaitre::kernels

#else

namespace theaitre::kernels {
const KernelTable* avx2_table_if_compiled() noexcept { return nullptr; }
}  // namespace theaitre::kernels

#endif
