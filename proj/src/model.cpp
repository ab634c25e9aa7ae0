#include "parafit/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "parafit/errors.hpp"

namespace parafit {

namespace {

bool is_conjugate_pair(std::complex<double> a, std::complex<double> b) {
  const double scale = std::abs(a) + std::abs(b) + 1.0;
  return std::abs(a - std::conj(b)) <= 1e-12 * scale;
}

}  // namespace

BasisPoles make_basis_poles(const std::vector<std::complex<double>>& sigma_in,
                            double s_scale) {
  if (sigma_in.empty()) throw ConfigError("make_basis_poles: empty pole list");
  if (!(s_scale > 0.0)) throw ConfigError("make_basis_poles: s_scale must be positive");

  std::vector<std::complex<double>> reals, pairs;  // pairs holds Im > 0 members
  std::vector<bool> used(sigma_in.size(), false);
  for (std::size_t i = 0; i < sigma_in.size(); ++i) {
    const std::complex<double> s = sigma_in[i];
    if (!(s.real() < 0.0))
      throw ConfigError("make_basis_poles: pole with non-negative real part");
    if (used[i]) continue;
    if (std::abs(s.imag()) <= 1e-14 * (1.0 + std::abs(s))) {
      reals.push_back({s.real(), 0.0});
      used[i] = true;
      continue;
    }
    bool matched = false;
    for (std::size_t j = i + 1; j < sigma_in.size(); ++j) {
      if (!used[j] && is_conjugate_pair(s, sigma_in[j])) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) throw ConfigError("make_basis_poles: unpaired complex pole");
    used[i] = true;
    pairs.push_back(s.imag() > 0.0 ? s : std::conj(s));
  }

  BasisPoles p;
  p.n_r = static_cast<int>(reals.size());
  p.n_c = static_cast<int>(pairs.size());
  p.s_scale = s_scale;
  const int nu = p.n_r + 2 * p.n_c;
  p.Sigma_real = Eigen::MatrixXd::Zero(nu, nu);
  p.b_sigma_real = Eigen::VectorXd::Zero(nu);
  int pos = 0;
  for (const auto& s : reals) {
    p.sigma.push_back(s);
    p.Sigma_real(pos, pos) = s.real();
    p.b_sigma_real(pos) = 1.0;
    ++pos;
  }
  for (const auto& s : pairs) {
    p.sigma.push_back(s);
    p.sigma.push_back(std::conj(s));
    const double a = s.real(), b = s.imag();
    p.Sigma_real(pos, pos) = a;
    p.Sigma_real(pos, pos + 1) = b;
    p.Sigma_real(pos + 1, pos) = -b;
    p.Sigma_real(pos + 1, pos + 1) = a;
    p.b_sigma_real(pos) = 1.0;
    p.b_sigma_real(pos + 1) = 0.0;
    pos += 2;
  }
  return p;
}

Eigen::VectorXcd rational_basis(const BasisPoles& poles,
                                std::complex<double> s_normalized) {
  const int nu = poles.nu();
  Eigen::VectorXcd r(nu + 1);
  r(0) = 1.0;
  Eigen::MatrixXcd M = -poles.Sigma_real.cast<std::complex<double>>();
  M.diagonal().array() += s_normalized;
  r.tail(nu) = M.partialPivLu().solve(
      poles.b_sigma_real.cast<std::complex<double>>().eval());
  return r;
}

namespace {

// Unconstrained univariate barycentric fit on the given samples (normalized
// frequencies) with the current poles; returns the denominator coefficients
// (d0, c) such that beta(s) = d0 + c (sI - Sigma)^-1 b_sigma.
std::pair<double, Eigen::VectorXd> univariate_denominator_fit(
    const BasisPoles& poles, const std::vector<const SamplePoint*>& slice) {
  const int nu = poles.nu();
  const int cols = 2 * (nu + 1);
  Eigen::MatrixXd G(2 * static_cast<int>(slice.size()), cols);
  int row = 0;
  for (const SamplePoint* sp : slice) {
    const Eigen::VectorXcd r = rational_basis(poles, sp->s / poles.s_scale);
    const Eigen::VectorXcd hr = -sp->H * r;
    for (int j = 0; j <= nu; ++j) {
      G(row, j) = r(j).real();
      G(row + 1, j) = r(j).imag();
      G(row, nu + 1 + j) = hr(j).real();
      G(row + 1, nu + 1 + j) = hr(j).imag();
    }
    row += 2;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(cols - 1);
  const double d0 = v(nu + 1);
  return {d0, v.tail(nu)};
}

// Zeros of beta(s) = d0 + c (sI - Sigma)^-1 b via the generalized pencil
// [[Sigma, b], [c, d0]] - lambda blkdiag(I, 0); infinite eigenvalues are
// dropped.
std::vector<std::complex<double>> denominator_fit_zeros(const BasisPoles& poles,
                                                        double d0,
                                                        const Eigen::VectorXd& c) {
  const int nu = poles.nu();
  Eigen::MatrixXd M(nu + 1, nu + 1), N = Eigen::MatrixXd::Zero(nu + 1, nu + 1);
  M.topLeftCorner(nu, nu) = poles.Sigma_real;
  M.topRightCorner(nu, 1) = poles.b_sigma_real;
  M.bottomLeftCorner(1, nu) = c.transpose();
  M(nu, nu) = d0;
  N.topLeftCorner(nu, nu).setIdentity();
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(M, N, false);
  std::vector<std::complex<double>> zeros;
  for (int i = 0; i <= nu; ++i) {
    const std::complex<double> a = ges.alphas()(i);
    const double b = ges.betas()(i);
    if (std::abs(b) > 1e-12 * (1.0 + std::abs(a))) zeros.push_back(a / b);
  }
  return zeros;
}

// Reflect into the open left half-plane and group into reals + conjugate
// pairs; returns empty when the grouping does not account for exactly nu
// poles (the caller then keeps its previous set).
std::vector<std::complex<double>> stabilize_and_group(
    std::vector<std::complex<double>> zeros, int nu) {
  std::vector<std::complex<double>> out;
  int count = 0;
  for (auto& z : zeros) {
    const double mag = std::abs(z);
    double re = -std::max(std::abs(z.real()), 1e-8 * (1.0 + mag));
    double im = z.imag();
    if (std::abs(im) <= 1e-9 * (1.0 + mag)) {
      out.push_back({re, 0.0});
      ++count;
    } else if (im > 0.0) {
      out.push_back({re, im});
      out.push_back({re, -im});
      count += 2;
    }
  }
  if (count != nu) return {};
  return out;
}

}  // namespace

BasisPoles heuristic_basis_poles(const Dataset& dataset, int nu,
                                 int relocation_passes) {
  if (dataset.samples.empty()) throw DataError("heuristic_basis_poles: empty dataset");
  if (nu < 1) throw ConfigError("heuristic_basis_poles: nu must be >= 1");

  double s_scale = 0.0;
  std::set<std::pair<double, double>> distinct;
  for (const SamplePoint& p : dataset.samples) {
    s_scale = std::max(s_scale, std::abs(p.s));
    distinct.insert({p.s.real(), p.s.imag()});
  }
  if (!(s_scale > 0.0)) throw DataError("heuristic_basis_poles: all frequencies are zero");
  if (nu > static_cast<int>(distinct.size()))
    throw DataError("heuristic_basis_poles: nu exceeds distinct frequency count");

  // Normalized band of nonzero |Im s|.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const SamplePoint& p : dataset.samples) {
    const double w = std::abs(p.s.imag()) / s_scale;
    if (w > 0.0) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  }
  if (!(hi > 0.0))
    throw DataError("heuristic_basis_poles: dataset has no nonzero frequencies");
  lo = std::max(lo, 1e-6 * hi);
  const double mid = 0.5 * (lo + hi);

  std::vector<std::complex<double>> sigma;
  if (nu % 2 == 1) sigma.push_back({-mid, 0.0});
  const int n_pairs = nu / 2;
  for (int i = 0; i < n_pairs; ++i) {
    const double im = n_pairs == 1 ? mid : lo + (hi - lo) * i / (n_pairs - 1);
    sigma.push_back({-im / 100.0, im});
    sigma.push_back({-im / 100.0, -im});
  }
  BasisPoles poles = make_basis_poles(sigma, s_scale);

  if (relocation_passes <= 0) return poles;

  // Theta-slice nearest the domain center.
  const int k = dataset.k;
  const Eigen::VectorXd center = Eigen::VectorXd::Constant(k, 0.5);
  double best = std::numeric_limits<double>::infinity();
  for (const SamplePoint& p : dataset.samples)
    best = std::min(best, (p.theta - center).norm());
  std::vector<const SamplePoint*> slice;
  for (const SamplePoint& p : dataset.samples)
    if ((p.theta - center).norm() <= best + 1e-12) slice.push_back(&p);

  for (int pass = 0; pass < relocation_passes; ++pass) {
    const auto [d0, c] = univariate_denominator_fit(poles, slice);
    const auto zeros = denominator_fit_zeros(poles, d0, c);
    const auto grouped = stabilize_and_group(zeros, nu);
    if (grouped.empty()) break;
    poles = make_basis_poles(grouped, s_scale);
  }
  return poles;
}

DenominatorRealization denominator_realization(const BarycentricModel& m) {
  const int nu = m.nu();
  const int K = m.param.K();
  DenominatorRealization r;
  r.A21 = m.param.b_theta * m.beta.rightCols(nu);
  r.b_theta_vec = m.param.b_theta * m.beta.col(0);
  r.A = Eigen::MatrixXd::Zero(nu + K, nu + K);
  r.A.topLeftCorner(nu, nu) = m.poles.Sigma_real;
  r.A.bottomLeftCorner(K, nu) = r.A21;
  r.A.bottomRightCorner(K, K) = m.param.pi;
  r.b.resize(nu + K);
  r.b.head(nu) = m.poles.b_sigma_real;
  r.b.tail(K) = r.b_theta_vec;
  r.c = Eigen::RowVectorXd::Zero(nu + K);
  r.c.tail(K) = m.param.eta;
  return r;
}

std::pair<Eigen::RowVectorXd, double> eval_c_d(const BarycentricModel& m,
                                               const Eigen::VectorXd& theta) {
  const Eigen::VectorXd phi = m.param.eval_phi(theta);
  Eigen::RowVectorXd c_theta = phi.transpose() * m.beta.rightCols(m.nu());
  const double d_theta = phi.dot(m.beta.col(0));
  return {std::move(c_theta), d_theta};
}

namespace {

std::complex<double> bilinear_eval(const Eigen::VectorXd& phi,
                                   const Eigen::MatrixXd& coeffs,
                                   const Eigen::VectorXcd& r) {
  const Eigen::VectorXd cr_re = coeffs * r.real();
  const Eigen::VectorXd cr_im = coeffs * r.imag();
  return {phi.dot(cr_re), phi.dot(cr_im)};
}

}  // namespace

std::complex<double> eval_numerator(const BarycentricModel& m, std::complex<double> s,
                                    const Eigen::VectorXd& theta) {
  const Eigen::VectorXd phi = m.param.eval_phi(theta);
  const Eigen::VectorXcd r = rational_basis(m.poles, s / m.poles.s_scale);
  return bilinear_eval(phi, m.alpha, r);
}

std::complex<double> eval_denominator(const BarycentricModel& m, std::complex<double> s,
                                      const Eigen::VectorXd& theta) {
  const Eigen::VectorXd phi = m.param.eval_phi(theta);
  const Eigen::VectorXcd r = rational_basis(m.poles, s / m.poles.s_scale);
  return bilinear_eval(phi, m.beta, r);
}

std::complex<double> eval_H(const BarycentricModel& m, std::complex<double> s,
                            const Eigen::VectorXd& theta) {
  const Eigen::VectorXd phi = m.param.eval_phi(theta);
  const Eigen::VectorXcd r = rational_basis(m.poles, s / m.poles.s_scale);
  const std::complex<double> num = bilinear_eval(phi, m.alpha, r);
  const std::complex<double> den = bilinear_eval(phi, m.beta, r);
  if (std::abs(den) < 1e-300)
    throw PoleEvaluationError("eval_H: denominator vanishes at the requested point");
  return num / den;
}

}  // namespace parafit
