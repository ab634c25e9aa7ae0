#include "parafit/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include "parafit/errors.hpp"

namespace parafit {

// ---------------------------------------------------------------------------
// SdpBlock
// ---------------------------------------------------------------------------

int SdpBlock::add_pool(const Eigen::VectorXd& v) {
  if (v.size() != size) throw ConfigError("SDP block: pool vector size mismatch");
  pool.push_back(v);
  return static_cast<int>(pool.size()) - 1;
}

int SdpBlock::unit_pool(int i) {
  if (i < 0 || i >= size) throw ConfigError("SDP block: unit_pool index out of range");
  if (static_cast<int>(unit_cache_.size()) < size) unit_cache_.assign(size, -1);
  if (unit_cache_[i] < 0) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(size);
    e(i) = 1.0;
    unit_cache_[i] = add_pool(e);
  }
  return unit_cache_[i];
}

void SdpBlock::add_dyad(int var, double coef, int u, int v) {
  if (var < 0) throw ConfigError("SDP block: negative variable index");
  if (u < 0 || u >= static_cast<int>(pool.size()) || v < 0 ||
      v >= static_cast<int>(pool.size()))
    throw ConfigError("SDP block: dyad pool index out of range");
  int local;
  auto it = var_lookup_.find(var);
  if (it == var_lookup_.end()) {
    local = static_cast<int>(vars.size());
    vars.push_back(var);
    dyads.emplace_back();
    var_lookup_.emplace(var, local);
  } else {
    local = it->second;
  }
  dyads[local].push_back(Dyad{coef, u, v});
}

void SdpBlock::add_entry(int var, double coef, int i, int j) {
  if (i == j) {
    add_dyad(var, 0.5 * coef, unit_pool(i), unit_pool(i));
  } else {
    add_dyad(var, coef, unit_pool(i), unit_pool(j));
  }
}

Eigen::MatrixXd SdpBlock::coeff_matrix(int local_index) const {
  if (local_index < 0 || local_index >= static_cast<int>(vars.size()))
    throw ConfigError("SDP block: coeff_matrix index out of range");
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(size, size);
  for (const Dyad& d : dyads[local_index]) {
    F.noalias() += d.coef * (pool[d.u] * pool[d.v].transpose());
    F.noalias() += d.coef * (pool[d.v] * pool[d.u].transpose());
  }
  return F;
}

Eigen::MatrixXd SdpBlock::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd F = F0;
  for (std::size_t l = 0; l < vars.size(); ++l) {
    if (vars[l] >= x.size()) throw ConfigError("SDP block: eval vector too short");
    const double xv = x(vars[l]);
    if (xv == 0.0) continue;
    for (const Dyad& d : dyads[l]) {
      F.noalias() += (xv * d.coef) * (pool[d.u] * pool[d.v].transpose());
      F.noalias() += (xv * d.coef) * (pool[d.v] * pool[d.u].transpose());
    }
  }
  return F;
}

// ---------------------------------------------------------------------------
// SdpProblem
// ---------------------------------------------------------------------------

int SdpProblem::add_vars(int count) {
  if (count < 0) throw ConfigError("SDP problem: negative variable count");
  const int start = n_vars;
  n_vars += count;
  objective.conservativeResize(n_vars);
  if (count > 0) objective.tail(count).setZero();
  return start;
}

SdpBlock& SdpProblem::add_block(int size) {
  if (size <= 0) throw ConfigError("SDP problem: block size must be positive");
  blocks.emplace_back(size);
  return blocks.back();
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::unbounded: return "unbounded";
    case SdpStatus::max_iter: return "max_iter";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Interior-point solver
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double min_eig(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Largest t with M + t*dM >= 0, given the Cholesky factor of M > 0.
double max_step(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& dM) {
  Eigen::MatrixXd A = llt.matrixL().solve(dM);
  Eigen::MatrixXd W = llt.matrixL().solve(A.transpose());
  W = 0.5 * (W + W.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin < 0.0)) return kInf;
  return -1.0 / lmin;
}

struct WorkBlock {
  int n = 0;
  Eigen::MatrixXd F0;
  Eigen::MatrixXd U;  // columns are the pool vectors
  std::vector<int> cvars;
  std::vector<std::vector<SdpBlock::Dyad>> dyads;
  double f0_norm = 0.0;

  // Equilibration diagonal (empty = identity) and the pre-equilibration
  // data norm. Feasibility DECISIONS must be made in original units: the
  // congruence preserves eigenvalue signs but not magnitudes, so a
  // tolerance on the equilibrated block says nothing quantitative about
  // the block the caller posed.
  Eigen::VectorXd deq;
  double f0_norm_orig = 0.0;

  // Worst relative violation, in original units, of the equilibrated slack
  // estimate E (= F(x) + F0 in equilibrated coordinates).
  double orig_violation(const Eigen::MatrixXd& E) const {
    Eigen::MatrixXd M = E;
    if (deq.size() != 0) {
      const Eigen::VectorXd inv = deq.cwiseInverse();
      M = inv.asDiagonal() * M * inv.asDiagonal();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const double base = deq.size() != 0 ? f0_norm_orig : f0_norm;
    return -es.eigenvalues()(0) / (1.0 + base);
  }

  Eigen::MatrixXd S, Y, Sinv, Rp;
  Eigen::LLT<Eigen::MatrixXd> Slt, Ylt;
  Eigen::MatrixXd dS_aff, dY_aff, dS, dY, Corr;

  // sum_l xc(cvars[l]) * F_l  with F_l given by the dyad lists.
  Eigen::MatrixXd lincomb(const Eigen::VectorXd& xc) const {
    const int p = static_cast<int>(U.cols());
    if (p == 0 || cvars.empty()) return Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t l = 0; l < cvars.size(); ++l) {
      const double xv = xc(cvars[l]);
      if (xv == 0.0) continue;
      for (const auto& d : dyads[l]) {
        W(d.u, d.v) += xv * d.coef;
        W(d.v, d.u) += xv * d.coef;
      }
    }
    Eigen::MatrixXd F = U * W * U.transpose();
    return 0.5 * (F + F.transpose()).eval();
  }

  // out(cvars[l]) += <F_l, Zsym> for every local variable l.
  void accumulate_inner(const Eigen::MatrixXd& Zsym, Eigen::VectorXd& out) const {
    if (U.cols() == 0 || cvars.empty()) return;
    Eigen::MatrixXd GZ = U.transpose() * Zsym * U;
    for (std::size_t l = 0; l < cvars.size(); ++l) {
      double a = 0.0;
      for (const auto& d : dyads[l]) a += d.coef * GZ(d.u, d.v);
      out(cvars[l]) += 2.0 * a;
    }
  }
};

}  // namespace

SdpSolution solve(const SdpProblem& p, const SdpOptions& opts) {
  SdpSolution sol;
  sol.x = Eigen::VectorXd::Zero(p.n_vars);

  Eigen::VectorXd cfull = Eigen::VectorXd::Zero(p.n_vars);
  if (p.objective.size() > 0) {
    if (p.objective.size() != p.n_vars)
      throw ConfigError("SDP problem: objective length does not match variable count");
    cfull = p.objective;
  }
  for (const auto& b : p.blocks) {
    if (b.size <= 0) throw ConfigError("SDP problem: block with nonpositive size");
    if (b.F0.rows() != b.size || b.F0.cols() != b.size)
      throw ConfigError("SDP problem: block constant term has wrong shape");
    if ((b.F0 - b.F0.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + b.F0.cwiseAbs().maxCoeff()))
      throw ConfigError("SDP problem: block constant term is not symmetric");
    for (int v : b.vars)
      if (v < 0 || v >= p.n_vars)
        throw ConfigError("SDP problem: block references unknown variable");
  }
  for (const auto& bd : p.lower_bounds)
    if (bd.first < 0 || bd.first >= p.n_vars)
      throw ConfigError("SDP problem: bound references unknown variable");
  if (p.var_scale.size() != 0) {
    if (p.var_scale.size() != p.n_vars)
      throw ConfigError("SDP problem: variable scale length does not match count");
    for (int i = 0; i < p.n_vars; ++i)
      if (!(p.var_scale(i) > 0.0) || !std::isfinite(p.var_scale(i)))
        throw ConfigError("SDP problem: variable scales must be positive and finite");
  }

  // Variables that appear nowhere cannot be constrained: with a nonzero
  // objective coefficient the problem is unbounded below; otherwise pin to 0.
  std::vector<char> present(static_cast<std::size_t>(std::max(p.n_vars, 1)), 0);
  for (const auto& b : p.blocks)
    for (int v : b.vars) present[v] = 1;
  for (const auto& bd : p.lower_bounds) present[bd.first] = 1;
  std::vector<int> g2c(p.n_vars, -1), c2g;
  for (int i = 0; i < p.n_vars; ++i) {
    if (present[i]) {
      g2c[i] = static_cast<int>(c2g.size());
      c2g.push_back(i);
    } else if (cfull(i) != 0.0) {
      sol.status = SdpStatus::unbounded;
      return sol;
    }
  }
  const int m = static_cast<int>(c2g.size());

  // Internal change of variables x = scale .* z (identity when unset).
  Eigen::VectorXd vscale = Eigen::VectorXd::Ones(std::max(m, 1));
  if (p.var_scale.size() != 0)
    for (int j = 0; j < m; ++j) vscale(j) = p.var_scale(c2g[j]);

  std::vector<WorkBlock> wbs;
  wbs.reserve(p.blocks.size() + p.lower_bounds.size());
  for (const auto& b : p.blocks) {
    WorkBlock wb;
    wb.n = b.size;
    wb.F0 = 0.5 * (b.F0 + b.F0.transpose());
    wb.U.resize(b.size, static_cast<int>(b.pool.size()));
    for (std::size_t j = 0; j < b.pool.size(); ++j)
      wb.U.col(static_cast<int>(j)) = b.pool[j];
    wb.cvars.reserve(b.vars.size());
    for (int v : b.vars) wb.cvars.push_back(g2c[v]);
    wb.dyads = b.dyads;
    for (std::size_t l = 0; l < wb.cvars.size(); ++l) {
      const double s = vscale(wb.cvars[l]);
      if (s != 1.0)
        for (auto& d : wb.dyads[l]) d.coef *= s;
    }
    wb.f0_norm = wb.F0.norm();
    wbs.push_back(std::move(wb));
  }
  for (const auto& bd : p.lower_bounds) {
    WorkBlock wb;
    wb.n = 1;
    wb.F0 = Eigen::MatrixXd::Constant(1, 1, -bd.second);
    wb.U = Eigen::MatrixXd::Ones(1, 1);
    wb.cvars = {g2c[bd.first]};
    wb.dyads = {{SdpBlock::Dyad{0.5 * vscale(g2c[bd.first]), 0, 0}}};
    wb.f0_norm = std::abs(bd.second);
    wbs.push_back(std::move(wb));
  }

  // Ruiz equilibration per block. A congruence F -> D F D by a positive
  // diagonal D leaves the set of feasible x unchanged but compresses the
  // dynamic range of the block data, which in linearized stability problems
  // otherwise spans many decades and destroys the interior-point iteration.
  // Scaling the pool vectors applies the same D to every dyad consistently.
  // One-by-one blocks (bounds and caps) are included: their constants can be
  // as far from unit scale as any matrix block's.
  for (auto& wb : wbs) {
    Eigen::MatrixXd E = wb.F0.cwiseAbs();
    if (wb.U.cols() > 0 && !wb.cvars.empty()) {
      Eigen::MatrixXd pabs =
          Eigen::MatrixXd::Zero(wb.U.cols(), wb.U.cols());
      for (const auto& dl : wb.dyads)
        for (const auto& d : dl) {
          pabs(d.u, d.v) += std::abs(d.coef);
          pabs(d.v, d.u) += std::abs(d.coef);
        }
      // Upper estimate of sum_l |F_l|; exactness is unnecessary for scaling.
      E += wb.U.cwiseAbs() * pabs * wb.U.cwiseAbs().transpose();
    }
    Eigen::VectorXd dvec = Eigen::VectorXd::Ones(wb.n);
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::VectorXd r(wb.n);
      for (int i = 0; i < wb.n; ++i) {
        const double mx = E.row(i).maxCoeff();
        r(i) = mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0;
      }
      E = r.asDiagonal() * E * r.asDiagonal();
      dvec = dvec.cwiseProduct(r);
    }
    wb.f0_norm_orig = wb.f0_norm;
    wb.deq = dvec;
    wb.F0 = dvec.asDiagonal() * wb.F0 * dvec.asDiagonal();
    wb.F0 = 0.5 * (wb.F0 + wb.F0.transpose()).eval();
    wb.U = dvec.asDiagonal() * wb.U;
    wb.f0_norm = wb.F0.norm();
  }

  if (m == 0) {
    // Pure feasibility of constants.
    bool ok = true;
    for (const auto& wb : wbs)
      ok = ok && (min_eig(wb.F0) >= -opts.feas_tol * (1.0 + wb.f0_norm));
    sol.status = ok ? SdpStatus::optimal : SdpStatus::infeasible;
    return sol;
  }

  Eigen::VectorXd c(m);
  for (int j = 0; j < m; ++j) c(j) = cfull(c2g[j]) * vscale(j);
  const double cnorm = 1.0 + c.cwiseAbs().maxCoeff();

  int N = 0;
  for (auto& wb : wbs) {
    N += wb.n;
    const double tau = std::max(10.0, 2.0 * wb.f0_norm);
    wb.S = tau * Eigen::MatrixXd::Identity(wb.n, wb.n);
    wb.Y = wb.S;
  }
  Eigen::VectorXd xc = Eigen::VectorXd::Zero(m);

  if (opts.warm_x.size() != 0) {
    if (opts.warm_x.size() != p.n_vars)
      throw ConfigError("SDP warm start length does not match variable count");
    Eigen::VectorXd xw(m);
    for (int j = 0; j < m; ++j) xw(j) = opts.warm_x(c2g[j]) / vscale(j);
    // Accept the warm point only if it is close to feasible; then start the
    // primal there with a small interior shift so S stays positive definite.
    double worst = 0.0;
    int worst_blk = -1;
    for (std::size_t bi = 0; bi < wbs.size(); ++bi) {
      auto& wb = wbs[bi];
      const double v = wb.orig_violation(wb.lincomb(xw) + wb.F0);
      if (v > worst) {
        worst = v;
        worst_blk = static_cast<int>(bi);
      }
    }
    if (opts.verbose)
      std::fprintf(stderr, "[sdp] warm start %s (worst violation %.3e, block %d)\n",
                   worst <= 1e-7 ? "accepted" : "rejected", worst, worst_blk);
    if (worst <= 1e-7) {
      xc = xw;
      for (auto& wb : wbs) {
        const Eigen::MatrixXd E = wb.lincomb(xc) + wb.F0;
        const double lm = min_eig(E);
        const double shift =
            std::max(1e-3 * (1.0 + wb.f0_norm), 1e-3 * (1.0 + wb.f0_norm) - 1.25 * lm);
        wb.S = 0.5 * (E + E.transpose());
        wb.S.diagonal().array() += shift;
      }
    }
  }

  Eigen::VectorXd best_xc;
  double best_pobj = kInf;

  const auto finish = [&](SdpStatus st, double pobj, double relgap, double maxres) {
    sol.status = st;
    sol.objective = pobj;
    sol.duality_gap = relgap;
    sol.max_residual = maxres;
    for (int j = 0; j < m; ++j) sol.x(c2g[j]) = vscale(j) * xc(j);
    if (best_xc.size() != 0) {
      sol.best_x.resize(p.n_vars);
      sol.best_x.setZero();
      for (int j = 0; j < m; ++j) sol.best_x(c2g[j]) = vscale(j) * best_xc(j);
      sol.best_objective = best_pobj;
    }
  };

  double mu0 = 0.0;
  double prev_alpha = 1.0;
  int stall = 0;
  int ray_streak = 0;
  double ray_mark = 0.0;
  double dres_min = kInf;

  double pobj = 0.0, relgap = kInf, pres = kInf, dres = kInf;

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    sol.iterations = iter;

    double gap = 0.0, dobj = 0.0;
    pres = 0.0;
    for (auto& wb : wbs) {
      wb.Rp = wb.lincomb(xc) + wb.F0 - wb.S;
      gap += (wb.S.array() * wb.Y.array()).sum();
      dobj -= (wb.F0.array() * wb.Y.array()).sum();
      pres = std::max(pres, wb.Rp.norm() / (1.0 + wb.f0_norm));
    }
    Eigen::VectorXd aty = Eigen::VectorXd::Zero(m);
    for (auto& wb : wbs) wb.accumulate_inner(wb.Y, aty);
    const Eigen::VectorXd rd = c - aty;
    dres = rd.cwiseAbs().maxCoeff() / cnorm;
    pobj = c.dot(xc);
    const double mu = gap / N;
    if (iter == 1) mu0 = std::max(mu, 1.0);
    relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (opts.verbose)
      std::fprintf(stderr,
                   "[sdp] it %3d  pobj % .6e  dobj % .6e  gap %.2e  pres %.2e  "
                   "dres %.2e\n",
                   iter, pobj, dobj, relgap, pres, dres);

    // Dual residual accepted at a 5x weaker level: its attainable floor is
    // set by the Schur conditioning near the optimum (roughly machine
    // epsilon over the terminal gap), while callers consume the primal
    // solution, whose feasibility stays strictly enforced.
    if (relgap <= opts.gap_tol && pres <= opts.feas_tol &&
        dres <= 5.0 * opts.feas_tol) {
      double maxres = 0.0;
      for (auto& wb : wbs)
        maxres = std::max(maxres, std::max(0.0, wb.orig_violation(wb.S + wb.Rp)));
      if (maxres <= opts.feas_tol) {
        // pobj - dobj = <S,Y> + rd'x + sum<Rp,Y> exactly, and <S,Y> >= 0, so
        // a crossing within the residual-induced slop is consistent with an
        // optimal pair; only a deeper crossing flags corrupted iterates.
        double resid_gap = rd.norm() * xc.norm();
        for (auto& wb : wbs) resid_gap += wb.Rp.norm() * wb.Y.norm();
        const bool weak_duality_ok =
            pobj - dobj >=
            -(1e-6 * (1.0 + std::abs(pobj) + std::abs(dobj)) + resid_gap);
        finish(weak_duality_ok ? SdpStatus::optimal : SdpStatus::numerical_failure,
               pobj, relgap, maxres);
        return sol;
      }
    }

    // Record the best verifiably feasible iterate. S + Rp equals F(x) + F0
    // exactly, so the eigenvalue check decides true feasibility on its own;
    // the residual test is only a cheap prefilter (a warm-started iteration
    // can keep a sizable slack mismatch while x itself is feasible). The
    // check runs only when prefilter and objective both pass, so the extra
    // cost is negligible; see SdpSolution::best_x for why callers want this
    // on degenerate problems.
    if (pres <= 1e4 * opts.feas_tol && pobj < best_pobj) {
      double fres = 0.0;
      for (auto& wb : wbs) {
        fres = std::max(fres, wb.orig_violation(wb.S + wb.Rp));
        if (fres > opts.feas_tol) break;
      }
      if (fres <= opts.feas_tol) {
        best_xc = xc;
        best_pobj = pobj;
      }
    }

    // Once the dual residual has exploded past any recoverable level while
    // a verified feasible iterate is in hand, further iterations only burn
    // time: every Newton system is built from the corrupted dual.
    dres_min = std::min(dres_min, dres);
    if (best_xc.size() != 0 && dres > std::max(1e3, 1e6 * dres_min)) {
      finish(SdpStatus::numerical_failure, pobj, relgap, pres);
      return sol;
    }

    // Primal infeasibility: a dual ray Y with A*(Y) ~ 0 and <F0, Y> < 0.
    // A snapshot ratio test cannot distinguish a true ray from the dual
    // iterates of a feasible problem whose optimum is merely huge (both show
    // large Y, small A*(Y)/|Y| and negative <F0, Y>/|Y|), so additionally
    // require |Y| to keep growing geometrically while the ray signature
    // holds: a real ray diverges, a feasible dual plateaus near its optimum.
    double yfro2 = 0.0;
    for (const auto& wb : wbs) yfro2 += wb.Y.squaredNorm();
    const double yfro = std::sqrt(yfro2);
    bool ray_like = false;
    if (yfro > 1e6) {
      const double ray_lin = aty.cwiseAbs().maxCoeff() / yfro;
      const double ray_obj = -dobj / yfro;
      ray_like = ray_lin <= 1e-8 && ray_obj <= -1e-5;
    }
    if (ray_like && yfro >= 1.5 * ray_mark) {
      ++ray_streak;
      ray_mark = yfro;
      if (ray_streak >= 3) {
        finish(SdpStatus::infeasible, pobj, relgap, pres);
        return sol;
      }
    } else if (!ray_like || yfro < ray_mark) {
      ray_streak = 0;
    }
    if (pobj < -1e12 * cnorm && pres <= 1e-5) {
      finish(SdpStatus::unbounded, pobj, relgap, pres);
      return sol;
    }

    bool fact_ok = true;
    for (auto& wb : wbs) {
      wb.Slt.compute(wb.S);
      wb.Ylt.compute(wb.Y);
      if (wb.Slt.info() != Eigen::Success || wb.Ylt.info() != Eigen::Success) {
        fact_ok = false;
        break;
      }
      wb.Sinv = wb.Slt.solve(Eigen::MatrixXd::Identity(wb.n, wb.n));
      wb.Sinv = 0.5 * (wb.Sinv + wb.Sinv.transpose()).eval();
    }
    if (!fact_ok) {
      finish(SdpStatus::numerical_failure, pobj, relgap, pres);
      return sol;
    }

    // Schur matrix B(i,j) = sum_blocks tr(F_i S^-1 F_j Y).
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, m);
    for (const auto& wb : wbs) {
      if (wb.U.cols() == 0 || wb.cvars.empty()) continue;
      const Eigen::MatrixXd SU = wb.Slt.solve(wb.U);
      const Eigen::MatrixXd G1 = wb.U.transpose() * SU;
      const Eigen::MatrixXd G2 = wb.U.transpose() * (wb.Y * wb.U);
      const int nl = static_cast<int>(wb.cvars.size());
      for (int l1 = 0; l1 < nl; ++l1) {
        const auto& D1 = wb.dyads[l1];
        for (int l2 = 0; l2 <= l1; ++l2) {
          const auto& D2 = wb.dyads[l2];
          double sum = 0.0;
          for (const auto& d : D1)
            for (const auto& e : D2)
              sum += d.coef * e.coef *
                     (G1(d.v, e.u) * G2(e.v, d.u) + G1(d.v, e.v) * G2(e.u, d.u) +
                      G1(d.u, e.u) * G2(e.v, d.v) + G1(d.u, e.v) * G2(e.u, d.v));
          const int i1 = wb.cvars[l1], i2 = wb.cvars[l2];
          if (i1 >= i2)
            B(i1, i2) += sum;
          else
            B(i2, i1) += sum;
        }
      }
    }
    B = B.selfadjointView<Eigen::Lower>();

    Eigen::LLT<Eigen::MatrixXd> Blt;
    {
      double reg = 0.0;
      for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd Breg = B;
        if (attempt > 0) {
          reg = (attempt == 1) ? 1e-12 * std::max(1.0, B.trace() / m) : reg * 100.0;
          Breg.diagonal().array() += reg;
        }
        Blt.compute(Breg);
        if (Blt.info() == Eigen::Success) break;
      }
      if (Blt.info() != Eigen::Success) {
        finish(SdpStatus::numerical_failure, pobj, relgap, pres);
        return sol;
      }
    }

    // One round of iterative refinement keeps the computed direction
    // consistent when the Schur system turns ill-conditioned near the
    // optimum; without it the dual residual floor rises above tolerance.
    const auto schur_solve = [&](const Eigen::VectorXd& r) {
      Eigen::VectorXd d = Blt.solve(r);
      d += Blt.solve(r - B * d);
      return d;
    };

    // Predictor (affine scaling direction).
    Eigen::VectorXd rhs = -rd;
    for (auto& wb : wbs) {
      Eigen::MatrixXd T = wb.Slt.solve(wb.Rp * wb.Y);
      Eigen::MatrixXd Zp = -wb.Y - 0.5 * (T + T.transpose());
      wb.accumulate_inner(Zp, rhs);
    }
    const Eigen::VectorXd dx_aff = schur_solve(rhs);
    double ap_aff = 1.0, ad_aff = 1.0;
    for (auto& wb : wbs) {
      wb.dS_aff = wb.lincomb(dx_aff) + wb.Rp;
      Eigen::MatrixXd T = wb.Slt.solve(wb.dS_aff * wb.Y);
      wb.dY_aff = -wb.Y - 0.5 * (T + T.transpose());
      ap_aff = std::min(ap_aff, 0.98 * max_step(wb.Slt, wb.dS_aff));
      ad_aff = std::min(ad_aff, 0.98 * max_step(wb.Ylt, wb.dY_aff));
    }

    double gap_aff = 0.0;
    for (const auto& wb : wbs)
      gap_aff += ((wb.S + ap_aff * wb.dS_aff).array() *
                  (wb.Y + ad_aff * wb.dY_aff).array())
                     .sum();
    double sigma;
    if (gap > 0.0) {
      const double ratio = gap_aff / gap;
      sigma = ratio * ratio * ratio;
    } else {
      sigma = 0.1;
    }
    sigma = std::clamp(sigma, 1e-8, 0.99);
    if (prev_alpha < 0.1) sigma = std::max(sigma, 0.5);
    const double smu = sigma * mu;

    // Corrector.
    rhs = -rd;
    for (auto& wb : wbs) {
      wb.Corr = wb.dS_aff * wb.dY_aff;
      Eigen::MatrixXd T = wb.Slt.solve(wb.Rp * wb.Y + wb.Corr);
      Eigen::MatrixXd Zc = smu * wb.Sinv - wb.Y - 0.5 * (T + T.transpose());
      wb.accumulate_inner(Zc, rhs);
    }
    const Eigen::VectorXd dx = schur_solve(rhs);
    double ap = 1.0, ad = 1.0;
    for (auto& wb : wbs) {
      wb.dS = wb.lincomb(dx) + wb.Rp;
      Eigen::MatrixXd T = wb.Slt.solve(wb.dS * wb.Y + wb.Corr);
      wb.dY = smu * wb.Sinv - wb.Y - 0.5 * (T + T.transpose());
      ap = std::min(ap, 0.98 * max_step(wb.Slt, wb.dS));
      ad = std::min(ad, 0.98 * max_step(wb.Ylt, wb.dY));
    }

    xc += ap * dx;
    for (auto& wb : wbs) {
      wb.S += ap * wb.dS;
      wb.S = 0.5 * (wb.S + wb.S.transpose()).eval();
      wb.Y += ad * wb.dY;
      wb.Y = 0.5 * (wb.Y + wb.Y.transpose()).eval();
    }

    prev_alpha = std::min(ap, ad);
    if (prev_alpha < 1e-8) {
      if (++stall >= 3) {
        finish(SdpStatus::numerical_failure, pobj, relgap, pres);
        return sol;
      }
    } else {
      stall = 0;
    }
    if (mu < 1e-16 * mu0 && (pres > opts.feas_tol || dres > opts.feas_tol)) {
      finish(SdpStatus::numerical_failure, pobj, relgap, pres);
      return sol;
    }
  }

  finish(SdpStatus::max_iter, pobj, relgap, std::max(pres, dres));
  return sol;
}

double max_violation(const SdpProblem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.n_vars)
    throw ConfigError("max_violation: vector length does not match variable count");
  double worst = -kInf;
  for (const auto& b : p.blocks) {
    const Eigen::MatrixXd F = b.eval(x);
    worst = std::max(worst, -min_eig(F) / (1.0 + b.F0.norm()));
  }
  for (const auto& bd : p.lower_bounds)
    worst = std::max(worst, (bd.second - x(bd.first)) / (1.0 + std::abs(bd.second)));
  return worst;
}

// ---------------------------------------------------------------------------
// Norm-squared epigraph block
// ---------------------------------------------------------------------------

void epigraph_of_norm_sq(SdpProblem& p, const Eigen::MatrixXd& L,
                         const std::vector<int>& var_indices, int t_index) {
  const int m = static_cast<int>(L.rows());
  if (static_cast<int>(var_indices.size()) != L.cols())
    throw ConfigError("epigraph_of_norm_sq: variable list does not match columns");
  if (t_index < 0 || t_index >= p.n_vars)
    throw ConfigError("epigraph_of_norm_sq: epigraph variable out of range");
  for (int v : var_indices)
    if (v < 0 || v >= p.n_vars)
      throw ConfigError("epigraph_of_norm_sq: variable index out of range");

  SdpBlock& b = p.add_block(m + 1);
  b.F0.topLeftCorner(m, m).setIdentity();
  const int e_last = b.unit_pool(m);
  for (int j = 0; j < L.cols(); ++j) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m + 1);
    col.head(m) = L.col(j);
    const int pu = b.add_pool(col);
    b.add_dyad(var_indices[j], 1.0, pu, e_last);
  }
  b.add_entry(t_index, 1.0, m, m);
}

}  // namespace parafit
