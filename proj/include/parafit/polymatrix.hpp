#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "parafit/parameterization.hpp"

namespace parafit {

// Matrix-valued polynomial on [0,1]^k stored as monomial coefficients keyed
// by multi-index (lexicographic order fixes all downstream layouts). Inputs
// here are affine in theta; congruences raise the per-variable degree to 2.
struct MatrixPoly {
  int k = 0;
  int nrows = 0, ncols = 0;
  std::map<std::vector<int>, Eigen::MatrixXd> coeffs;

  Eigen::MatrixXd eval(const Eigen::VectorXd& theta) const;
  int max_degree() const;  // largest per-variable degree present
  void add(const std::vector<int>& idx, const Eigen::MatrixXd& m);
};

// The 2(nu+K) x (2nu+K) affine block matrix
//   [ I_nu  0     0        ]
//   [ 0     0     Theta    ]
//   [ 0     I_nu  0        ]
//   [ 0     0     I_K      ]
// whose congruence with a certificate P expresses frequency-domain
// positivity conditions; build_M0 is the variant with Theta transposed
// (imaginary-axis version).
MatrixPoly build_M(const Parameterization& param, int nu);
MatrixPoly build_M0(const Parameterization& param, int nu);

// W(theta) = M(theta)' P M(theta), symmetric coefficients.
MatrixPoly congruence(const MatrixPoly& M, const Eigen::MatrixXd& P);

// Multivariate Bernstein representation at uniform per-variable degree.
struct BernsteinForm {
  int k = 0;
  int delta_bar = 0;
  int nrows = 0, ncols = 0;
  std::map<std::vector<int>, Eigen::MatrixXd> coeffs;  // all n <= delta_bar

  Eigen::MatrixXd eval(const Eigen::VectorXd& theta) const;
};

// Tensor-product basis change; univariate rule
//   b_j = sum_{i<=j} [C(j,i)/C(delta_bar,i)] a_i.
BernsteinForm monomial_to_bernstein(const MatrixPoly& W, int delta_bar);

// Single-step-repeated degree elevation to new_delta >= current degree;
// elevated coefficients are convex combinations of the originals.
BernsteinForm elevate(const BernsteinForm& B, int new_delta);

double binomial(int n, int j);
double bernstein_basis(int degree, int j, double t);

// All multi-indices with 0 <= n_d <= max_deg per variable, lexicographic.
std::vector<std::vector<int>> multi_indices(int k, int max_deg);

// prod_d C(n_d, m_d)/C(delta_bar, m_d), zero when any m_d > n_d.
double bernstein_transform_coeff(const std::vector<int>& n,
                                 const std::vector<int>& m, int delta_bar);

}  // namespace parafit
