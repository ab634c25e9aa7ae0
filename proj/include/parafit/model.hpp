#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "parafit/dataset.hpp"
#include "parafit/parameterization.hpp"

namespace parafit {

// Fixed set of nu stable basis poles together with the real (block-diagonal)
// companion of diag(sigma). Real poles come first, then conjugate pairs in
// consecutive (Im > 0, Im < 0) order. Each pair contributes a 2x2 block
// [[a, b], [-b, a]] for sigma = a + jb, with b-vector entries (1, 0); each
// real pole contributes a 1x1 block [a] with b-vector entry 1.
struct BasisPoles {
  std::vector<std::complex<double>> sigma;
  int n_r = 0;
  int n_c = 0;
  Eigen::MatrixXd Sigma_real;
  Eigen::VectorXd b_sigma_real;
  double s_scale = 1.0;  // all s are divided by this before fitting/evaluation

  int nu() const { return static_cast<int>(sigma.size()); }
};

BasisPoles make_basis_poles(const std::vector<std::complex<double>>& sigma,
                            double s_scale);

// Deterministic pole seed: floor(nu/2) conjugate pairs with imaginary parts
// linearly spaced over the sampled (normalized) frequency band and real parts
// -imag/100, plus one real pole at the band midpoint when nu is odd. Each
// relocation pass then fits an unconstrained univariate barycentric model on
// the theta-slice nearest the domain center, takes its denominator zeros,
// reflects any right-half-plane zero across the imaginary axis, and adopts
// the result as the new pole set.
BasisPoles heuristic_basis_poles(const Dataset& dataset, int nu,
                                 int relocation_passes);

// Rational row basis r(s) = (1, (sI - Sigma)^-1 b_sigma) at normalized s,
// length nu+1.
Eigen::VectorXcd rational_basis(const BasisPoles& poles,
                                std::complex<double> s_normalized);

// Rational model in doubly-barycentric form: numerator and denominator are
// both sums a_0(theta) + sum_n a_n(theta)/(s - sigma_n) whose coefficient
// functions are rows of alpha/beta applied to phi(theta). All storage is
// real; conjugate symmetry H(conj s) = conj H(s) holds by construction.
struct BarycentricModel {
  Parameterization param;
  BasisPoles poles;
  Eigen::MatrixXd alpha;  // rho x (nu+1), columns alpha_0..alpha_nu
  Eigen::MatrixXd beta;   // rho x (nu+1)

  int k() const { return param.k; }
  int nu() const { return poles.nu(); }
  int rho() const { return param.rho; }
};

// State-space realization of the denominator beta(s, theta) as
// c [Delta(s,theta) - A]^-1 b with Delta = blkdiag(s I_nu, Theta(theta)):
// A = [[Sigma, 0], [A21, Pi]], b = (b_sigma; b_theta_vec), c = (0, eta).
struct DenominatorRealization {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::RowVectorXd c;
  Eigen::MatrixXd A21;          // K x nu, equals B_theta * (beta_1 .. beta_nu)
  Eigen::VectorXd b_theta_vec;  // K, equals B_theta * beta_0
};

DenominatorRealization denominator_realization(const BarycentricModel& m);

// Frequency-domain coefficients of the denominator at a fixed theta:
// beta(s, theta) = c_theta (sI - Sigma)^-1 b_sigma + d_theta.
// c_theta = eta [Theta - Pi]^-1 A21, d_theta = eta [Theta - Pi]^-1 b_theta_vec.
std::pair<Eigen::RowVectorXd, double> eval_c_d(const BarycentricModel& m,
                                               const Eigen::VectorXd& theta);

// Evaluate numerator, denominator, and their ratio at physical s (the stored
// frequency normalization is applied internally).
std::complex<double> eval_numerator(const BarycentricModel& m, std::complex<double> s,
                                    const Eigen::VectorXd& theta);
std::complex<double> eval_denominator(const BarycentricModel& m, std::complex<double> s,
                                      const Eigen::VectorXd& theta);
std::complex<double> eval_H(const BarycentricModel& m, std::complex<double> s,
                            const Eigen::VectorXd& theta);

}  // namespace parafit
