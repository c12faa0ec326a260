#include "core/dft.hpp"

#include <cmath>
#include <numbers>

namespace sitcom {

namespace {

std::vector<Complex> twiddles(std::size_t period, int sign) {
  std::vector<Complex> w(period);
  for (std::size_t k = 0; k < period; ++k) {
    double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(period);
    w[k] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

}  // namespace

std::vector<Complex> partial_dft2(const std::vector<Complex>& in, std::size_t rows_in,
                                  std::size_t cols_in, std::size_t rows_out, std::size_t cols_out,
                                  std::size_t period_r, std::size_t period_c, int sign,
                                  double scale) {
  const auto wr = twiddles(period_r, sign);
  const auto wc = twiddles(period_c, sign);

  // Columns first: tmp[r, b] = sum_s in[r,s] wc[(b*s) mod period_c]
  std::vector<Complex> tmp(rows_in * cols_out);
  for (std::size_t r = 0; r < rows_in; ++r) {
    for (std::size_t b = 0; b < cols_out; ++b) {
      Complex acc{};
      for (std::size_t s = 0; s < cols_in; ++s) acc += in[r * cols_in + s] * wc[(b * s) % period_c];
      tmp[r * cols_out + b] = acc;
    }
  }
  std::vector<Complex> out(rows_out * cols_out);
  for (std::size_t a = 0; a < rows_out; ++a) {
    for (std::size_t r = 0; r < rows_in; ++r) {
      const Complex w = wr[(a * r) % period_r];
      for (std::size_t b = 0; b < cols_out; ++b) out[a * cols_out + b] += w * tmp[r * cols_out + b];
    }
  }
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace sitcom
