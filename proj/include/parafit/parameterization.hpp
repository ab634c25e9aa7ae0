#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace parafit {

enum class BasisKind { Monomial, Chebyshev, PartialFraction };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

// One-parameter realization psi(t) = eta * (Theta(t) - Pi)^{-1} of a row of
// basis functions on [0,1]. All builders produce square systems with
// dim() == rho (one state per basis function).
struct UnivariateRealization {
  BasisKind kind = BasisKind::Monomial;
  int rho = 0;        // number of basis functions
  int degree = 0;     // polynomial degree (monomial / chebyshev)
  double h = 0.0;     // imaginary offset of the pole segment (partial-fraction)
  Eigen::MatrixXd theta0;  // Theta(t) = theta0 + t*theta1
  Eigen::MatrixXd theta1;
  Eigen::MatrixXd pi;
  Eigen::RowVectorXd eta;

  int dim() const { return static_cast<int>(pi.rows()); }
  Eigen::MatrixXd theta_at(double t) const { return theta0 + t * theta1; }
  // eta * (Theta(t)-Pi)^{-1} via linear solve.
  Eigen::RowVectorXd eval(double t) const;
};

// Basis (1, t, t^2, ..., t^degree).
UnivariateRealization build_monomial(int degree);

// Chebyshev polynomials of the first kind mapped to [0,1]: T_n(2t-1).
UnivariateRealization build_chebyshev(int degree);

// Real/imaginary partial-fraction pairs for floor(rho_k/2) complex poles
// uniformly spaced on [0,1] + h*j (single pole 1 + h*j), plus 1/(t+0.5) when
// rho_k is odd.
UnivariateRealization build_partial_fraction(int rho_k, double h);

// Upper-triangular change of basis C with (1,t,...,t^d) * C = (T_0,...,T_d)
// evaluated at x = 2t-1. Exposed for oracle tests.
Eigen::MatrixXd chebyshev_change_of_basis(int degree);

// Multivariate tensor-product realization phi(theta) =
// eta * (Theta(theta) - Pi)^{-1} * B_theta, Theta affine in each parameter.
struct Parameterization {
  int k = 0;
  int rho = 0;  // total basis count, product of per-dimension counts
  std::vector<int> per_dim_rho;
  Eigen::MatrixXd theta_const;
  std::vector<Eigen::MatrixXd> theta_coeffs;  // one K x K matrix per dimension
  Eigen::MatrixXd pi;
  Eigen::MatrixXd b_theta;  // K x rho selector
  Eigen::RowVectorXd eta;
  std::vector<UnivariateRealization> parts;  // retained for serialization

  int K() const { return static_cast<int>(pi.rows()); }
  Eigen::MatrixXd theta_at(const Eigen::VectorXd& theta) const;
  // eta * (Theta(theta)-Pi)^{-1} (full internal row, before B_theta).
  Eigen::RowVectorXd eval_eta_row(const Eigen::VectorXd& theta) const;
  Eigen::RowVectorXd eval_phi(const Eigen::VectorXd& theta) const;
};

// phi(theta) = kron(psi_1(theta_1), ..., psi_k(theta_k)), realized with a
// block-bidiagonal Pi chaining the per-dimension systems; parts must each
// have dim() == rho.
Parameterization tensor_product(const std::vector<UnivariateRealization>& parts);

}  // namespace parafit
