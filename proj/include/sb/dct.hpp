#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace sb::dct {

using Block = std::array<double, 64>;

// Natural (row-major) index of the k-th coefficient in JPEG zigzag order.
inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

namespace detail {

// basis[u][x] = c(u) cos((2x+1) u pi / 16), c(0) = sqrt(1/8), else sqrt(2/8).
inline const std::array<std::array<double, 8>, 8>& basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5;
      for (int x = 0; x < 8; ++x)
        b[u][x] = cu * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return table;
}

}  // namespace detail

// Orthonormal 2-D DCT-II over a row-major 8x8 block (JPEG FDCT scaling).
inline Block forward(const Block& in) {
  const auto& b = detail::basis();
  Block tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += b[u][x] * in[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += b[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  return out;
}

inline Block inverse(const Block& in) {
  const auto& b = detail::basis();
  Block tmp{}, out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += b[u][x] * in[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += b[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
  return out;
}

}  // namespace sb::dct
