#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace parafit {

// One frequency/parameter sample of a transfer function.
struct SamplePoint {
  std::complex<double> s;   // rad/s, pre-normalization
  Eigen::VectorXd theta;    // point in [0,1]^k
  std::complex<double> H;
};

// A collection of samples with uniform parameter dimension and per-sample
// positive weights (all 1 by default).
struct Dataset {
  int k = 0;
  std::vector<SamplePoint> samples;
  Eigen::VectorXd weights;  // size samples.size(), positive

  std::size_t size() const { return samples.size(); }
};

// Synthetic benchmark: block-diagonal state-space system with three 2x2
// rotation blocks (the first sweeping its frequency with theta_1) and a
// diagonal tail diag(-1..-1000). Sampled at s = j*2*pi*f on a uniform f grid
// over f_range, crossed with n_theta uniform theta_1 values in [0,1].
Dataset generate_penzl(int n_freq, int n_theta,
                       std::pair<double, double> f_range = {1.0, 100.0});

// Evaluate the benchmark transfer function at one (s, theta_1) point.
std::complex<double> penzl_H(std::complex<double> s, double theta1);

// CSV interchange. Columns exactly: re_s, im_s, theta_1..theta_k, re_H, im_H
// with a mandatory header row; k is inferred from the header. Values survive
// a save/load round-trip bit-exactly. Weights are not stored.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& d, const std::string& path);

}  // namespace parafit
