#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "parafit/dataset.hpp"
#include "parafit/model.hpp"

namespace parafit {

// Zeros of the fixed-theta denominator (poles of the fitted model live among
// them after cancellation-free realization). Computed in normalized s units
// as eigenvalues of Sigma_real - b_sigma * c(theta) / d(theta). A d(theta)
// that vanishes relative to c flags a zero at infinity (improper model at
// this theta); the zero list is then empty.
struct ZeroResult {
  std::vector<std::complex<double>> zeros;
  bool zero_at_infinity = false;
};

ZeroResult denominator_zeros(const BarycentricModel& m, const Eigen::VectorXd& theta);

// Deterministic stability scan over a Sobol grid of n_points in [0,1]^k.
// pass <=> every zero has Re < 0 and no point is flagged improper.
struct StabilityReport {
  double max_re_zero = 0.0;        // most positive real part seen (normalized)
  Eigen::VectorXd argmax_theta;    // grid point attaining it
  double min_abs_d = 0.0;          // smallest |d(theta)| over the grid
  int n_zero_at_infinity = 0;      // points flagged improper
  bool pass = false;
};

StabilityReport check_stability_grid(const BarycentricModel& m, int n_points);

// Minimum of Re beta(j*omega, theta) over a combined log+linear omega grid of
// n_freq points spanning 0 to 10x the maximum data frequency (the stored
// normalization constant), together with the s->infinity value d(theta).
// Positive margin means the denominator is strictly positive-real along the
// imaginary axis at this theta.
double esp_margin(const BarycentricModel& m, const Eigen::VectorXd& theta, int n_freq);

// sqrt(sum_i |H_i - H(s_i, theta_i)|^2 / I). Samples where the model has a
// pole (non-finite evaluation) are excluded; their count is reported through
// n_excluded when non-null so callers can warn.
double rms_error(const BarycentricModel& m, const Dataset& d, int* n_excluded = nullptr);

}  // namespace parafit
