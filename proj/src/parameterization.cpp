#include "parafit/parameterization.hpp"

#include <cmath>
#include <complex>

#include "parafit/errors.hpp"

namespace parafit {

namespace {

// Throws if Theta(t)-Pi is numerically singular anywhere on a uniform grid.
void check_univariate_regularity(const UnivariateRealization& r) {
  for (int g = 0; g <= 100; ++g) {
    const double t = g / 100.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(r.theta_at(t) - r.pi);
    if (lu.rcond() < 1e-12) {
      throw DegenerateParameterization(
          "univariate realization singular near t=" + std::to_string(t));
    }
  }
}

}  // namespace

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Monomial: return "monomial";
    case BasisKind::Chebyshev: return "chebyshev";
    case BasisKind::PartialFraction: return "partial-fraction";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "monomial") return BasisKind::Monomial;
  if (name == "chebyshev") return BasisKind::Chebyshev;
  if (name == "partial-fraction") return BasisKind::PartialFraction;
  throw ConfigError("unknown basis kind: " + name);
}

Eigen::RowVectorXd UnivariateRealization::eval(double t) const {
  // row = eta * (Theta-Pi)^{-1}  <=>  (Theta-Pi)^T row^T = eta^T
  Eigen::PartialPivLU<Eigen::MatrixXd> lu((theta_at(t) - pi).transpose());
  if (lu.rcond() < 1e-12) {
    throw DegenerateParameterization(
        "univariate realization singular at t=" + std::to_string(t));
  }
  return lu.solve(eta.transpose()).transpose();
}

UnivariateRealization build_monomial(int degree) {
  if (degree < 0) throw ConfigError("monomial degree must be >= 0");
  const int n = degree + 1;
  UnivariateRealization r;
  r.kind = BasisKind::Monomial;
  r.rho = n;
  r.degree = degree;
  r.theta0 = Eigen::MatrixXd::Zero(n, n);
  r.theta1 = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) r.theta1(i, i + 1) = 1.0;
  r.pi = Eigen::MatrixXd::Identity(n, n);
  r.eta = Eigen::RowVectorXd::Zero(n);
  r.eta(0) = -1.0;
  check_univariate_regularity(r);
  return r;
}

Eigen::MatrixXd chebyshev_change_of_basis(int degree) {
  // Column j holds the monomial coefficients (in t) of T_j(2t-1).
  const int n = degree + 1;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::VectorXd> cols(n);
  cols[0] = Eigen::VectorXd::Zero(n);
  cols[0](0) = 1.0;
  if (degree >= 1) {
    cols[1] = Eigen::VectorXd::Zero(n);
    cols[1](0) = -1.0;
    cols[1](1) = 2.0;
  }
  for (int j = 2; j <= degree; ++j) {
    // T_j = 2*(2t-1)*T_{j-1} - T_{j-2}
    Eigen::VectorXd v = -2.0 * cols[j - 1] - cols[j - 2];
    for (int i = 0; i + 1 < n; ++i) v(i + 1) += 4.0 * cols[j - 1](i);
    cols[j] = v;
  }
  for (int j = 0; j < n; ++j) C.col(j) = cols[j];
  return C;
}

UnivariateRealization build_chebyshev(int degree) {
  if (degree < 0) throw ConfigError("chebyshev degree must be >= 0");
  UnivariateRealization r = build_monomial(degree);
  const Eigen::MatrixXd C = chebyshev_change_of_basis(degree);
  // psi_new = psi_mono * C corresponds to premultiplying Theta and Pi by C^{-1}.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(C);
  r.theta0 = lu.solve(r.theta0);
  r.theta1 = lu.solve(r.theta1);
  r.pi = lu.solve(r.pi);
  r.kind = BasisKind::Chebyshev;
  check_univariate_regularity(r);
  return r;
}

UnivariateRealization build_partial_fraction(int rho_k, double h) {
  if (rho_k < 1) throw ConfigError("partial-fraction rho must be >= 1");
  if (h <= 0.0) throw ConfigError("partial-fraction h must be > 0");
  const int n_poles = rho_k / 2;
  const bool odd = (rho_k % 2) != 0;
  UnivariateRealization r;
  r.kind = BasisKind::PartialFraction;
  r.rho = rho_k;
  r.h = h;
  r.theta0 = Eigen::MatrixXd::Zero(rho_k, rho_k);
  r.theta1 = Eigen::MatrixXd::Identity(rho_k, rho_k);
  r.pi = Eigen::MatrixXd::Zero(rho_k, rho_k);
  r.eta = Eigen::RowVectorXd::Zero(rho_k);
  for (int m = 0; m < n_poles; ++m) {
    const double re = (n_poles == 1) ? 1.0 : double(m) / double(n_poles - 1);
    // 2x2 rotation block realizing (Re 1/(t-p), Im 1/(t-p)) for p = re + h*j.
    r.pi(2 * m, 2 * m) = re;
    r.pi(2 * m, 2 * m + 1) = h;
    r.pi(2 * m + 1, 2 * m) = -h;
    r.pi(2 * m + 1, 2 * m + 1) = re;
    r.eta(2 * m) = 1.0;
  }
  if (odd) {
    // Simple real fraction 1/(t+0.5); pole kept off [0,1].
    r.pi(rho_k - 1, rho_k - 1) = -0.5;
    r.eta(rho_k - 1) = 1.0;
  }
  check_univariate_regularity(r);
  return r;
}

Eigen::MatrixXd Parameterization::theta_at(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd T = theta_const;
  for (int d = 0; d < k; ++d) T += theta(d) * theta_coeffs[d];
  return T;
}

Eigen::RowVectorXd Parameterization::eval_eta_row(
    const Eigen::VectorXd& theta) const {
  if (theta.size() != k) throw ConfigError("theta dimension mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu((theta_at(theta) - pi).transpose());
  if (lu.rcond() < 1e-12) {
    throw DegenerateParameterization("Theta(theta)-Pi numerically singular");
  }
  return lu.solve(eta.transpose()).transpose();
}

Eigen::RowVectorXd Parameterization::eval_phi(
    const Eigen::VectorXd& theta) const {
  return eval_eta_row(theta) * b_theta;
}

Parameterization tensor_product(const std::vector<UnivariateRealization>& parts) {
  if (parts.empty()) throw ConfigError("tensor_product needs at least one part");
  const int k = static_cast<int>(parts.size());
  for (const auto& p : parts) {
    if (p.dim() != p.rho) {
      throw ConfigError("tensor_product requires square parts (dim == rho)");
    }
  }
  // suffix[d] = product of basis counts of dimensions after d
  std::vector<int> suffix(k, 1);
  for (int d = k - 2; d >= 0; --d) suffix[d] = suffix[d + 1] * parts[d + 1].rho;
  std::vector<int> bsize(k), offset(k);
  int K = 0;
  for (int d = 0; d < k; ++d) {
    bsize[d] = parts[d].rho * suffix[d];
    offset[d] = K;
    K += bsize[d];
  }
  const int rho = parts[0].rho * suffix[0];

  Parameterization P;
  P.k = k;
  P.rho = rho;
  P.parts = parts;
  for (const auto& p : parts) P.per_dim_rho.push_back(p.rho);
  P.theta_const = Eigen::MatrixXd::Zero(K, K);
  P.pi = Eigen::MatrixXd::Zero(K, K);
  P.eta = Eigen::RowVectorXd::Zero(K);
  P.theta_coeffs.assign(k, Eigen::MatrixXd::Zero(K, K));

  auto kron_I = [](const Eigen::MatrixXd& A, int m) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(A.rows() * m, A.cols() * m);
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j)
        if (A(i, j) != 0.0)
          R.block(i * m, j * m, m, m) =
              A(i, j) * Eigen::MatrixXd::Identity(m, m);
    return R;
  };

  for (int d = 0; d < k; ++d) {
    const int m = suffix[d];
    P.theta_const.block(offset[d], offset[d], bsize[d], bsize[d]) =
        kron_I(parts[d].theta0, m);
    P.theta_coeffs[d].block(offset[d], offset[d], bsize[d], bsize[d]) =
        kron_I(parts[d].theta1, m);
    P.pi.block(offset[d], offset[d], bsize[d], bsize[d]) =
        kron_I(parts[d].pi, m);
    if (d + 1 < k) {
      // chain block: row block d+1, column block d
      P.pi.block(offset[d + 1], offset[d], bsize[d + 1], bsize[d]) =
          kron_I(parts[d].eta, m);
    }
  }
  P.eta.segment(offset[k - 1], bsize[k - 1]) = parts[k - 1].eta;
  P.b_theta = Eigen::MatrixXd::Zero(K, rho);
  P.b_theta.topRows(rho) = Eigen::MatrixXd::Identity(rho, rho);
  return P;
}

}  // namespace parafit
