#ifndef SME_TESTS_ORACLE_HELPERS_HPP
#define SME_TESTS_ORACLE_HELPERS_HPP

// Test-only numerical oracles, independent of the library's own evaluation
// paths: Fornberg finite-difference weights on arbitrary nodes and a few
// closed-form reference quantities.

#include <cassert>
#include <cstddef>
#include <vector>

namespace oracle {

// Fornberg's algorithm: weights for the d-th derivative at x0 from the given
// nodes.  Returns weights w so that f^(d)(x0) ~ sum w[i] f(x[i]).
inline std::vector<double> fd_weights(double x0, const std::vector<double>& x, int d) {
  const int nn = int(x.size());
  assert(nn > d);
  std::vector<std::vector<double>> c(nn, std::vector<double>(d + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < nn; ++i) {
    const int mn = std::min(i, d);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(nn);
  for (int i = 0; i < nn; ++i) w[i] = c[i][d];
  return w;
}

// d-th derivative (d = 1 or 2) of sampled data at index i, using a centered
// (where possible) stencil of `width` nodes on a nonuniform grid.
inline double fd_derivative(const std::vector<double>& x, const std::vector<double>& f,
                            std::size_t i, int d, int width = 5) {
  const int nn = int(x.size());
  int lo = int(i) - width / 2;
  if (lo < 0) lo = 0;
  if (lo + width > nn) lo = nn - width;
  std::vector<double> nodes(x.begin() + lo, x.begin() + lo + width);
  const std::vector<double> w = fd_weights(x[i], nodes, d);
  double sum = 0.0;
  for (int k = 0; k < width; ++k) sum += w[std::size_t(k)] * f[std::size_t(lo + k)];
  return sum;
}

}  // namespace oracle

#endif  // SME_TESTS_ORACLE_HELPERS_HPP
