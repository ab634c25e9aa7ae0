#include "parafit/verify.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

#include "parafit/errors.hpp"
#include "parafit/sobol.hpp"

namespace parafit {

ZeroResult denominator_zeros(const BarycentricModel& m, const Eigen::VectorXd& theta) {
  ZeroResult out;
  const int nu = m.nu();
  if (nu == 0) return out;  // constant denominator: no finite zeros

  const auto [c, d] = eval_c_d(m, theta);
  const double cnorm = c.norm();
  if (std::abs(d) < 1e-12 * cnorm) {
    out.zero_at_infinity = true;
    return out;
  }
  if (d == 0.0) {
    // c == 0 as well: denominator identically zero at this theta.
    out.zero_at_infinity = true;
    return out;
  }

  const Eigen::MatrixXd Z =
      m.poles.Sigma_real - m.poles.b_sigma_real * (c / d);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Z, /*computeEigenvectors=*/false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  out.zeros.assign(ev.data(), ev.data() + ev.size());
  return out;
}

StabilityReport check_stability_grid(const BarycentricModel& m, int n_points) {
  if (n_points < 1) throw ConfigError("stability grid needs at least one point");
  StabilityReport rep;
  rep.max_re_zero = -std::numeric_limits<double>::infinity();
  rep.min_abs_d = std::numeric_limits<double>::infinity();
  rep.argmax_theta = Eigen::VectorXd::Constant(m.k(), 0.5);

  for (const Eigen::VectorXd& theta : sobol_points(n_points, m.k())) {
    const auto [c, d] = eval_c_d(m, theta);
    rep.min_abs_d = std::min(rep.min_abs_d, std::abs(d));
    const ZeroResult zr = denominator_zeros(m, theta);
    if (zr.zero_at_infinity) {
      ++rep.n_zero_at_infinity;
      continue;
    }
    for (const std::complex<double>& z : zr.zeros) {
      if (z.real() > rep.max_re_zero) {
        rep.max_re_zero = z.real();
        rep.argmax_theta = theta;
      }
    }
  }
  rep.pass = rep.n_zero_at_infinity == 0 && rep.max_re_zero < 0.0;
  return rep;
}

double esp_margin(const BarycentricModel& m, const Eigen::VectorXd& theta, int n_freq) {
  if (n_freq < 2) throw ConfigError("the frequency grid needs at least two points");
  const double wmax = 10.0 * m.poles.s_scale;

  const auto [c, d] = eval_c_d(m, theta);
  double margin = d;  // Re beta(j*inf, theta)

  const int n_log = n_freq / 2;
  const int n_lin = n_freq - n_log;
  const auto probe = [&](double w) {
    const std::complex<double> b =
        eval_denominator(m, std::complex<double>(0.0, w), theta);
    margin = std::min(margin, b.real());
  };
  for (int i = 0; i < n_lin; ++i)
    probe(wmax * static_cast<double>(i) / static_cast<double>(n_lin - 1 > 0 ? n_lin - 1 : 1));
  if (n_log > 0) {
    const double lo = std::log(1e-4 * wmax);
    const double hi = std::log(wmax);
    for (int i = 0; i < n_log; ++i) {
      const double t = n_log > 1 ? static_cast<double>(i) / (n_log - 1) : 1.0;
      probe(std::exp(lo + t * (hi - lo)));
    }
  }
  return margin;
}

double rms_error(const BarycentricModel& m, const Dataset& d, int* n_excluded) {
  if (d.samples.empty()) throw DataError("error metric needs a nonempty dataset");
  double acc = 0.0;
  int used = 0;
  int excluded = 0;
  for (const SamplePoint& p : d.samples) {
    const std::complex<double> h = eval_H(m, p.s, p.theta);
    if (!std::isfinite(h.real()) || !std::isfinite(h.imag())) {
      ++excluded;
      continue;
    }
    acc += std::norm(h - p.H);
    ++used;
  }
  if (n_excluded) *n_excluded = excluded;
  if (used == 0) throw DataError("every sample hit a model pole; no finite residuals");
  return std::sqrt(acc / static_cast<double>(d.samples.size()));
}

}  // namespace parafit
