#include "parafit/fitting.hpp"

#include <algorithm>
#include <cmath>

#include "parafit/errors.hpp"

namespace parafit {

namespace {

Eigen::Map<const Eigen::VectorXd> vec(const Eigen::MatrixXd& m) {
  return {m.data(), m.size()};
}

}  // namespace

double RegressionSystem::cost(const Eigen::MatrixXd& alpha,
                              const Eigen::MatrixXd& beta) const {
  return (phi_beta * vec(beta) - phi_alpha * vec(alpha)).squaredNorm();
}

double RegressionSystem::reduced_cost(const Eigen::MatrixXd& beta) const {
  return (L * vec(beta)).squaredNorm();
}

RegressionSystem assemble(const Dataset& dataset, const Parameterization& param,
                          const BasisPoles& poles, const Eigen::VectorXd& weights) {
  const auto I = static_cast<Eigen::Index>(dataset.samples.size());
  if (I == 0) throw DataError("assemble: empty dataset");
  if (weights.size() != I)
    throw ConfigError("assemble: weight count does not match sample count");
  for (Eigen::Index i = 0; i < I; ++i)
    if (!(weights(i) > 0.0)) throw ConfigError("assemble: weights must be positive");

  const int nu = poles.nu();
  const int rho = param.rho;
  const int m = rho * (nu + 1);
  RegressionSystem sys;
  sys.weights = weights;
  sys.row_count = static_cast<int>(2 * I);
  sys.phi_alpha.resize(2 * I, m);
  sys.phi_beta.resize(2 * I, m);

  for (Eigen::Index i = 0; i < I; ++i) {
    const SamplePoint& p = dataset.samples[i];
    const double sw = std::sqrt(weights(i));
    const Eigen::VectorXcd r = rational_basis(poles, p.s / poles.s_scale);
    const Eigen::VectorXd phi = param.eval_phi(p.theta);
    // Column (n*rho + l) multiplies coefficient (l, n): value r_n * phi_l.
    for (int n = 0; n <= nu; ++n) {
      const std::complex<double> rn = sw * r(n);
      const std::complex<double> hrn = p.H * rn;
      for (int l = 0; l < rho; ++l) {
        const int col = n * rho + l;
        sys.phi_alpha(2 * i, col) = rn.real() * phi(l);
        sys.phi_alpha(2 * i + 1, col) = rn.imag() * phi(l);
        sys.phi_beta(2 * i, col) = hrn.real() * phi(l);
        sys.phi_beta(2 * i + 1, col) = hrn.imag() * phi(l);
      }
    }
  }
  return sys;
}

RegressionSystem eliminate_numerator(RegressionSystem sys) {
  const Eigen::Index m = sys.phi_alpha.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.phi_alpha,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  if (rank < m)
    sys.warnings.push_back(
        "numerator design is rank-deficient (rank " + std::to_string(rank) + " of " +
        std::to_string(m) + "); proceeding on the rank-revealed subspace");

  sys.alpha_U = svd.matrixU().leftCols(rank);
  sys.alpha_V = svd.matrixV().leftCols(rank);
  sys.alpha_sv = sv.head(rank);
  sys.alpha_rank = rank;

  // Orthogonal-complement projection of the denominator design.
  Eigen::MatrixXd proj = sys.phi_beta - sys.alpha_U * (sys.alpha_U.transpose() * sys.phi_beta);

  // Compress to a square factor: ||proj x|| = ||R x|| with R from a QR
  // factorization of proj.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(proj);
  sys.L = Eigen::MatrixXd::Zero(m, m);
  const Eigen::Index r_rows = std::min<Eigen::Index>(proj.rows(), m);
  sys.L.topRows(r_rows) =
      qr.matrixQR().topRows(r_rows).triangularView<Eigen::Upper>();
  return sys;
}

Eigen::MatrixXd recover_numerator(const RegressionSystem& sys,
                                  const Eigen::MatrixXd& beta) {
  if (sys.alpha_rank == 0 && sys.alpha_U.size() == 0)
    throw ConfigError("recover_numerator: eliminate_numerator has not been run");
  const Eigen::VectorXd y = sys.phi_beta * vec(beta);
  const Eigen::VectorXd z =
      sys.alpha_sv.array().inverse().matrix().asDiagonal() *
      (sys.alpha_U.transpose() * y);
  Eigen::VectorXd va = sys.alpha_V * z;
  return Eigen::Map<const Eigen::MatrixXd>(va.data(), beta.rows(), beta.cols());
}

Eigen::VectorXd psk_update_weights(const BarycentricModel& model,
                                   const Dataset& dataset, double exponent) {
  const auto I = static_cast<Eigen::Index>(dataset.samples.size());
  if (I == 0) throw DataError("psk_update_weights: empty dataset");
  Eigen::VectorXd w(I);
  bool any_nonzero = false;
  for (Eigen::Index i = 0; i < I; ++i) {
    const SamplePoint& p = dataset.samples[i];
    const double ab = std::abs(eval_denominator(model, p.s, p.theta));
    if (ab > 1e-300) any_nonzero = true;
    w(i) = std::pow(std::max(ab, 1e-300), -exponent);
  }
  if (!any_nonzero)
    throw SolverError("psk_update_weights: denominator is identically zero");

  std::vector<double> sorted(w.data(), w.data() + I);
  std::sort(sorted.begin(), sorted.end());
  const double med = I % 2 == 1
                         ? sorted[I / 2]
                         : 0.5 * (sorted[I / 2 - 1] + sorted[I / 2]);
  const double lo = med / 1e8, hi = med * 1e8;
  for (Eigen::Index i = 0; i < I; ++i) w(i) = std::clamp(w(i), lo, hi);
  return w;
}

}  // namespace parafit
