#pragma once

// Range-reduced polynomial exp shared by the scalar and SIMD kernels. Both
// evaluate the same sequence of correctly rounded operations (fma included),
// so results match bit for bit.
//
//   x = n*ln2 + r, |r| <= ln2/2;  exp(x) = 2^n * P(r)
//
// P is the degree-13 Taylor polynomial; truncation error is below 1e-17
// relative on the reduced range.

namespace theaitre::kernels::detail {

inline constexpr double kExpHi = 709.0;
// Below this the result is flushed to exactly zero (covers -inf).
inline constexpr double kExpLo = -708.0;
inline constexpr double kLog2e = 1.4426950408889634074;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
// Adding this to an integral double leaves the integer in the low mantissa bits.
inline constexpr double kShifter = 6755399441055744.0;  // 2^52 + 2^51

inline constexpr int kPolyDegree = 13;
// 1/k!, highest degree first.
inline constexpr double kPoly[kPolyDegree + 1] = {
    1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
    1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
    1.0 / 6.0,          1.0 / 2.0,         1.0,              1.0,
};

}  // namespace theaitre::kernels::detail
