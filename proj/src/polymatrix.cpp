#include "parafit/polymatrix.hpp"

#include <cmath>
#include <functional>

#include "parafit/errors.hpp"

namespace parafit {

Eigen::MatrixXd MatrixPoly::eval(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nrows, ncols);
  for (const auto& [idx, m] : coeffs) {
    double mono = 1.0;
    for (int d = 0; d < k; ++d)
      for (int e = 0; e < idx[d]; ++e) mono *= theta(d);
    out += mono * m;
  }
  return out;
}

int MatrixPoly::max_degree() const {
  int deg = 0;
  for (const auto& [idx, m] : coeffs)
    for (int d : idx) deg = std::max(deg, d);
  return deg;
}

void MatrixPoly::add(const std::vector<int>& idx, const Eigen::MatrixXd& m) {
  auto it = coeffs.find(idx);
  if (it == coeffs.end())
    coeffs.emplace(idx, m);
  else
    it->second += m;
}

namespace {

MatrixPoly build_M_impl(const Parameterization& param, int nu, bool transpose_theta) {
  const int K = param.K();
  MatrixPoly M;
  M.k = param.k;
  M.nrows = 2 * (nu + K);
  M.ncols = 2 * nu + K;

  auto theta_block = [&](const Eigen::MatrixXd& t) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(M.nrows, M.ncols);
    c.block(nu, 2 * nu, K, K) = transpose_theta ? t.transpose() : t;
    return c;
  };

  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(M.nrows, M.ncols);
  c0.topLeftCorner(nu, nu).setIdentity();
  c0.block(nu + K, nu, nu, nu).setIdentity();
  c0.bottomRightCorner(K, K).setIdentity();
  c0 += theta_block(param.theta_const);
  M.add(std::vector<int>(param.k, 0), c0);

  for (int d = 0; d < param.k; ++d) {
    std::vector<int> idx(param.k, 0);
    idx[d] = 1;
    M.add(idx, theta_block(param.theta_coeffs[d]));
  }
  return M;
}

}  // namespace

MatrixPoly build_M(const Parameterization& param, int nu) {
  return build_M_impl(param, nu, false);
}

MatrixPoly build_M0(const Parameterization& param, int nu) {
  return build_M_impl(param, nu, true);
}

MatrixPoly congruence(const MatrixPoly& M, const Eigen::MatrixXd& P) {
  if (P.rows() != M.nrows || P.cols() != M.nrows)
    throw ConfigError("congruence: certificate dimension mismatch");
  if (!P.isApprox(P.transpose(), 1e-12))
    throw ConfigError("congruence: certificate must be symmetric");
  MatrixPoly W;
  W.k = M.k;
  W.nrows = W.ncols = M.ncols;
  for (const auto& [a, Ma] : M.coeffs) {
    for (const auto& [b, Mb] : M.coeffs) {
      std::vector<int> m(M.k);
      for (int d = 0; d < M.k; ++d) m[d] = a[d] + b[d];
      W.add(m, Ma.transpose() * P * Mb);
    }
  }
  // Symmetrize to scrub round-off asymmetry from the cross terms.
  for (auto& [idx, c] : W.coeffs) c = 0.5 * (c + c.transpose()).eval();
  return W;
}

double binomial(int n, int j) {
  if (j < 0 || j > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < j; ++i) r = r * (n - i) / (i + 1);
  return r;
}

double bernstein_basis(int degree, int j, double t) {
  return binomial(degree, j) * std::pow(t, j) * std::pow(1.0 - t, degree - j);
}

std::vector<std::vector<int>> multi_indices(int k, int max_deg) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k, 0);
  while (true) {
    out.push_back(cur);
    int d = k - 1;
    while (d >= 0 && cur[d] == max_deg) {
      cur[d] = 0;
      --d;
    }
    if (d < 0) break;
    ++cur[d];
  }
  return out;
}

double bernstein_transform_coeff(const std::vector<int>& n,
                                 const std::vector<int>& m, int delta_bar) {
  double c = 1.0;
  for (std::size_t d = 0; d < n.size(); ++d) {
    if (m[d] > n[d]) return 0.0;
    c *= binomial(n[d], m[d]) / binomial(delta_bar, m[d]);
  }
  return c;
}

Eigen::MatrixXd BernsteinForm::eval(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nrows, ncols);
  for (const auto& [n, c] : coeffs) {
    double basis = 1.0;
    for (int d = 0; d < k; ++d) basis *= bernstein_basis(delta_bar, n[d], theta(d));
    out += basis * c;
  }
  return out;
}

BernsteinForm monomial_to_bernstein(const MatrixPoly& W, int delta_bar) {
  if (delta_bar < W.max_degree())
    throw ConfigError("monomial_to_bernstein: elevation degree below polynomial degree");
  BernsteinForm B;
  B.k = W.k;
  B.delta_bar = delta_bar;
  B.nrows = W.nrows;
  B.ncols = W.ncols;
  for (const auto& n : multi_indices(W.k, delta_bar)) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(W.nrows, W.ncols);
    for (const auto& [m, a] : W.coeffs) {
      const double t = bernstein_transform_coeff(n, m, delta_bar);
      if (t != 0.0) c += t * a;
    }
    B.coeffs.emplace(n, std::move(c));
  }
  return B;
}

BernsteinForm elevate(const BernsteinForm& B, int new_delta) {
  if (new_delta < B.delta_bar)
    throw ConfigError("elevate: target degree below current degree");
  BernsteinForm cur = B;
  while (cur.delta_bar < new_delta) {
    const int d1 = cur.delta_bar + 1;
    BernsteinForm next;
    next.k = cur.k;
    next.delta_bar = d1;
    next.nrows = cur.nrows;
    next.ncols = cur.ncols;
    for (const auto& n : multi_indices(cur.k, d1)) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(cur.nrows, cur.ncols);
      // One elevation step per variable in sequence: along each dimension,
      // b'_j = (j/d1) b_{j-1} + (1 - j/d1) b_j. Applying dimensions
      // sequentially gives the tensor-product weights below.
      std::vector<int> m(cur.k);
      std::function<void(int, double)> rec = [&](int dim, double w) {
        if (w == 0.0) return;
        if (dim == cur.k) {
          auto it = cur.coeffs.find(m);
          if (it != cur.coeffs.end()) c += w * it->second;
          return;
        }
        const int j = n[dim];
        const double f = static_cast<double>(j) / d1;
        if (j >= 1 && j - 1 <= cur.delta_bar) {
          m[dim] = j - 1;
          rec(dim + 1, w * f);
        }
        if (j <= cur.delta_bar) {
          m[dim] = j;
          rec(dim + 1, w * (1.0 - f));
        }
      };
      rec(0, 1.0);
      next.coeffs.emplace(n, std::move(c));
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace parafit
