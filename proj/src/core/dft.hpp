#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sitcom {

using Complex = std::complex<double>;

// out[a,b] = scale * sum_{r<rows_in, s<cols_in} in[r,s] * exp(sign*2*pi*i*(a*r/period_r + b*s/period_c))
// for a < rows_out, b < cols_out. Separable, O(rows*cols*(rows+cols)).
// Covers zero-padded forward transforms (rows_in < period) and their adjoints.
std::vector<Complex> partial_dft2(const std::vector<Complex>& in, std::size_t rows_in,
                                  std::size_t cols_in, std::size_t rows_out, std::size_t cols_out,
                                  std::size_t period_r, std::size_t period_c, int sign,
                                  double scale);

}  // namespace sitcom
