#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "parafit/dataset.hpp"
#include "parafit/fitting.hpp"
#include "parafit/model.hpp"
#include "parafit/parameterization.hpp"
#include "parafit/polymatrix.hpp"
#include "parafit/sdp.hpp"

namespace parafit {

// ---------------------------------------------------------------------------
// Fixed-coefficient constraint matrices (for verification and oracles)
// ---------------------------------------------------------------------------

// (Gamma_st, K_st(beta)): Gamma_st = c_hat c_hat' with c_hat = [c', 0]' from
// the denominator realization; K_st = [[A, b], [I, 0]], 2(nu+K) x (nu+K+1).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_st_pair(const BarycentricModel& m);

// (Gamma_esp(beta), K_esp): Gamma_esp is the three-block symmetric matrix
// linear in beta (off-diagonal A21 and b_theta couplings); K_esp is the
// constant [[Sigma,0,b_sigma],[0,Pi',eta'],[I,0,0],[0,I,0]].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_esp_pair(const BarycentricModel& m);

// ---------------------------------------------------------------------------
// SDP variable layout shared by the three assemblies
// ---------------------------------------------------------------------------

// Symmetric matrix variables are packed as the upper triangle, row by row
// (i <= j). Multi-index blocks follow the lexicographic order produced by
// multi_indices().
struct StabilityLayout {
  int n_beta = 0;   // rho*(nu+1)
  int beta_start = -1;
  int t_index = -1;
  int P_start = -1;   // single certificate (ESP / feasibility)
  int Pp_start = -1;  // ICO: positive part
  int Pm_start = -1;  // ICO: negative part
  int mu_index = -1;
  int lambda_index = -1;
  std::vector<int> X_start;  // one slack matrix per Bernstein multi-index

  int np = 0;  // certificate size 2(nu+K)
  int nx = 0;  // slack size nu
  int q = 0;   // nu+K+1

  static int sym_size(int n) { return n * (n + 1) / 2; }
  static int sym_index(int n, int i, int j);  // requires i <= j
  static Eigen::MatrixXd unpack_sym(const Eigen::VectorXd& x, int start, int n);
  static Eigen::VectorXd pack_sym(const Eigen::MatrixXd& S);
};

struct StabilitySdp {
  SdpProblem prob;
  StabilityLayout layout;
};

// min J(beta) subject to the conservative positive-real denominator LMI
// Gamma_esp(beta) - K_esp' P K_esp >= I and Bernstein cone blocks (free
// slacks) on M0' P M0. Variables: vec(beta), t, P, X_n.
StabilitySdp assemble_esp_sdp(const Eigen::MatrixXd& L, const Parameterization& param,
                              const BasisPoles& poles, int delta_bar);

// Margin form of the conservative fit: max lambda subject to
// Gamma_esp(beta) - K_esp' P K_esp >= lambda*I, the same cone blocks as
// assemble_esp_sdp, and J(beta) <= 1. Because the main inequality is jointly
// homogeneous in (beta, P), dividing its optimizer by lambda* yields the
// exact optimizer of the unit-margin problem; solving in this form keeps
// the iterates at unit scale when the intrinsic margin is tiny.
StabilitySdp assemble_esp_margin_sdp(const Eigen::MatrixXd& L,
                                     const Parameterization& param,
                                     const BasisPoles& poles, int delta_bar);

// max lambda subject to mu*Gamma_st - K_st(beta)' P K_st(beta) >= lambda*I,
// Bernstein cone blocks (PSD slacks) on M' P M, mu >= 1e-6, lambda <= 10.
// beta is fixed from the given model.
StabilitySdp assemble_feasibility_sdp(const BarycentricModel& m, int delta_bar);

// Certified conservative (positive-real denominator) margin of a fixed
// model: max lambda with Gamma_esp(beta) - K_esp' P K_esp >= lambda*I and
// the free-slack cone blocks at elevation degree delta_bar, with beta held
// at the model's coefficients. For every theta and every s = j*omega the
// optimum obeys
//   lambda  <=  2 Re beta(s, theta) / (1 + |x1(s)|^2 + |x2(theta)|^2),
// where x1 = (sI - Sigma)^{-1} b_sigma and x2 = (Theta(theta)' - Pi')^{-1}
// eta', and it approaches that infimum from below as delta_bar grows. This
// makes the grid-evaluated ratio an independent oracle for the whole
// certificate machinery (realization, cone blocks, Bernstein transform).
double esp_margin_at(const BarycentricModel& m, int delta_bar,
                     const SdpOptions& opts);

struct CertificateResult {
  Eigen::MatrixXd P;
  double mu = 0.0;
  double lambda = 0.0;  // margin achieved before any rescale
  int delta_bar_used = 0;
  // Bernstein cone slacks of the certificate, rescaled alongside (P, mu);
  // together with P and mu they form a complete feasible point of the
  // refinement surrogate and serve as its warm start.
  std::vector<Eigen::MatrixXd> X;
};

// Runs the feasibility SDP; accepts lambda >= 1 as-is, rescales (P, mu) by
// 1/lambda for 0 < lambda < 1, retries once at delta_bar+2 when lambda <= 0,
// and throws CertificateError if that also fails.
CertificateResult find_certificate(const BarycentricModel& m, int delta_bar,
                                   const SdpOptions& opts);

// Eigenvalue split P = (P_plus - I) - (P_minus - I) with both parts >= I.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> split_P(const Eigen::MatrixXd& P_bar);

struct IcoState {
  Eigen::MatrixXd beta_bar;
  Eigen::MatrixXd P_plus_bar, P_minus_bar;  // both >= I
  double mu = 0.0;
  double gamma = 0.0;  // cost at the center
  int iteration = 0;
};

// Convex surrogate of the exact-stability fit around `center`: minimize the
// epigraph t of J(beta) subject to the linearized three-block constraint
// R >= 0, P_plus >= I, P_minus >= I, mu >= 1e-6, and Bernstein cone blocks
// (PSD slacks) on M'(P_plus - P_minus)M. The R block is blocks.front().
StabilitySdp assemble_ico_sdp(const IcoState& center, const Eigen::MatrixXd& L,
                              const Parameterization& param, const BasisPoles& poles,
                              int delta_bar);

struct AlgorithmOptions {
  int n_psk = 5;
  int n_ico = 20;
  int delta_bar = 6;
  double eps_ico = 1e-2;
  double weight_exponent = 1.0;
  SdpOptions sdp;
};

struct Algorithm1Result {
  BarycentricModel model;             // final stability-constrained model
  BarycentricModel esp_model;         // model after the PSK/ESP stage
  std::vector<double> gamma_history;  // gamma_0, gamma_1, ..., nonincreasing
  Eigen::MatrixXd P_plus, P_minus;    // final certificate split
  double mu = 0.0;
  int delta_bar_used = 0;
};

// Full fitting driver: PSK/ESP loop, certificate search for the ESP model,
// then the iterative convex-overbounding loop with relative-decrease
// termination at eps_ico.
Algorithm1Result run_algorithm1(const Dataset& data, const Parameterization& param,
                                const BasisPoles& poles, const AlgorithmOptions& opts);

}  // namespace parafit
