#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "parafit/dataset.hpp"
#include "parafit/model.hpp"
#include "parafit/parameterization.hpp"
#include "parafit/sdp.hpp"

namespace parafit {

// Weighted linearized least-squares system for one fit iteration. Rows come
// in real/imaginary pairs, one pair per sample; columns follow the
// column-major vec of the rho x (nu+1) coefficient matrices (constant-term
// column first).
struct RegressionSystem {
  Eigen::MatrixXd phi_alpha;  // 2I x rho(nu+1), numerator design
  Eigen::MatrixXd phi_beta;   // 2I x rho(nu+1), H-scaled denominator design
  Eigen::VectorXd weights;    // the w_i used to build the rows
  int row_count = 0;          // 2I

  // Filled by eliminate_numerator:
  Eigen::MatrixXd L;  // square factor with J(beta) = ||L vec(beta)||^2
  std::vector<std::string> warnings;

  // Cached factorization of phi_alpha for numerator recovery.
  Eigen::MatrixXd alpha_U, alpha_V;
  Eigen::VectorXd alpha_sv;
  Eigen::Index alpha_rank = 0;

  // J0(alpha, beta) = || phi_beta vec(beta) - phi_alpha vec(alpha) ||^2
  double cost(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& beta) const;
  double reduced_cost(const Eigen::MatrixXd& beta) const;  // ||L vec(beta)||^2
};

RegressionSystem assemble(const Dataset& dataset, const Parameterization& param,
                          const BasisPoles& poles, const Eigen::VectorXd& weights);

// Projects the denominator design onto the orthogonal complement of the
// numerator column space (rank-revealing, singular values below
// 1e-10 * sigma_max dropped) and compresses it to the square factor L.
RegressionSystem eliminate_numerator(RegressionSystem sys);

// alpha = argmin_alpha J0(alpha, beta), via the factorization cached by
// eliminate_numerator. Returns rho x (nu+1).
Eigen::MatrixXd recover_numerator(const RegressionSystem& sys,
                                  const Eigen::MatrixXd& beta);

// w_i = 1 / |beta(s_i, theta_i)|^exponent, clamped to eight decades around
// the median unclamped weight.
Eigen::VectorXd psk_update_weights(const BarycentricModel& model,
                                   const Dataset& dataset, double exponent = 1.0);

// Parameterized Sanathanan-Koerner loop with the conservative
// positive-real denominator constraint: n_psk rounds of
// {assemble, eliminate, solve the constrained SDP, update weights}.
// Returns the fitted model (numerator recovered under the final weights)
// and gamma0 = J(beta) under the final weights. Implemented alongside the
// stability machinery.
std::pair<BarycentricModel, double> psk_esp_loop(
    const Dataset& dataset, const Parameterization& param, const BasisPoles& poles,
    int n_psk, int delta_bar, const SdpOptions& sdp_opts,
    double weight_exponent = 1.0);

}  // namespace parafit
