#include "parafit/sobol.hpp"

#include <cstdint>
#include <stdexcept>

#include "parafit/errors.hpp"
#include "sobol_tables.hpp"

namespace parafit {

namespace {

// 32-bit direction integers for one dimension, V[i] scaled so that the
// leading bit of m_1 sits at bit 31.
std::vector<std::uint32_t> direction_integers(int dim, int nbits) {
  std::vector<std::uint32_t> v(static_cast<std::size_t>(nbits));
  if (dim == 0) {
    for (int i = 0; i < nbits; ++i) v[i] = 1u << (31 - i);
    return v;
  }
  const std::uint32_t poly = detail::kSobolPoly[dim];
  int s = 0;
  while ((poly >> (s + 1)) != 0u) ++s;  // degree of the polynomial
  std::vector<std::uint32_t> m(static_cast<std::size_t>(nbits));
  for (int i = 0; i < s && i < nbits; ++i) m[i] = detail::kSobolMinit[dim][i];
  for (int i = s; i < nbits; ++i) {
    std::uint32_t mi = m[i - s] ^ (m[i - s] << s);
    for (int j = 1; j < s; ++j) {
      const std::uint32_t a = (poly >> (s - j)) & 1u;
      if (a) mi ^= m[i - j] << j;
    }
    m[i] = mi;
  }
  for (int i = 0; i < nbits; ++i) v[i] = m[i] << (31 - i);
  return v;
}

}  // namespace

std::vector<Eigen::VectorXd> sobol_points(int n, int k) {
  if (n < 0) throw ConfigError("sobol_points: point count must be non-negative");
  if (k < 1 || k > detail::kSobolMaxDim)
    throw ConfigError("sobol_points: dimension must be between 1 and " +
                      std::to_string(detail::kSobolMaxDim));
  constexpr int kBits = 32;
  std::vector<std::vector<std::uint32_t>> v(static_cast<std::size_t>(k));
  for (int d = 0; d < k; ++d) v[d] = direction_integers(d, kBits);

  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(n));
  std::vector<std::uint32_t> x(static_cast<std::size_t>(k), 0u);
  constexpr double scale = 1.0 / 4294967296.0;  // 2^-32
  // Gray-code stepping; the all-zero initial state is not emitted.
  for (int i = 0; i < n; ++i) {
    std::uint32_t gray = static_cast<std::uint32_t>(i);
    int c = 0;
    while (gray & 1u) {
      gray >>= 1;
      ++c;
    }
    Eigen::VectorXd p(k);
    for (int d = 0; d < k; ++d) {
      x[d] ^= v[d][c];
      p(d) = static_cast<double>(x[d]) * scale;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace parafit
