#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

namespace parafit {

// One PSD constraint block F0 + sum_i x_i F_i >= 0. The per-variable
// coefficient matrices F_i are stored in factored form as sums of symmetric
// rank-2 terms coef * (u v' + v u') over a pool of vectors shared within the
// block; this keeps Schur-complement assembly cheap for the congruence-heavy
// constraints this library generates.
struct SdpBlock {
  struct Dyad {
    double coef;
    int u, v;  // pool indices
  };

  int size = 0;
  Eigen::MatrixXd F0;
  std::vector<Eigen::VectorXd> pool;
  std::vector<int> vars;                 // global variable indices
  std::vector<std::vector<Dyad>> dyads;  // parallel to vars

  explicit SdpBlock(int n = 0)
      : size(n), F0(Eigen::MatrixXd::Zero(n, n)) {}

  int add_pool(const Eigen::VectorXd& v);
  int unit_pool(int i);  // pool index of basis vector e_i (cached)

  // F_var += coef * (pool[u] pool[v]' + pool[v] pool[u]')
  void add_dyad(int var, double coef, int u, int v);
  // F_var += value at entries (i,j) and (j,i)  [i == j adds once]
  void add_entry(int var, double coef, int i, int j);

  Eigen::MatrixXd coeff_matrix(int local_index) const;  // densify F_{vars[local]}
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;  // F0 + sum x_i F_i

 private:
  std::vector<int> unit_cache_;
  std::unordered_map<int, int> var_lookup_;  // global var -> local index
};

struct SdpProblem {
  int n_vars = 0;
  Eigen::VectorXd objective;  // minimize objective . x
  std::vector<SdpBlock> blocks;
  std::vector<std::pair<int, double>> lower_bounds;  // x_i >= value

  // Optional per-variable magnitude hints (empty = all ones). The solver
  // substitutes x_i = var_scale_i * z_i internally so that the iterates stay
  // near unit magnitude when the expected solution is badly scaled; the
  // problem being solved and the reported solution are unchanged.
  Eigen::VectorXd var_scale;

  int add_vars(int count);
  SdpBlock& add_block(int size);
};

enum class SdpStatus { optimal, infeasible, unbounded, max_iter, numerical_failure };

std::string to_string(SdpStatus s);

struct SdpOptions {
  double gap_tol = 1e-7;   // relative duality gap at acceptance
  double feas_tol = 1e-7;  // primal residual bound; dual accepted at 5x this
  int max_iter = 200;
  bool verbose = false;

  // Optional primal warm start (size n_vars, or empty for a cold start).
  // When the point is verifiably feasible the iteration starts from it with
  // a small interior shift, which rescues problems whose feasible set is far
  // from the origin; an infeasible warm point falls back to the cold start.
  Eigen::VectorXd warm_x;
};

struct SdpSolution {
  Eigen::VectorXd x;
  SdpStatus status = SdpStatus::numerical_failure;
  double objective = 0.0;
  double duality_gap = 0.0;
  double max_residual = 0.0;
  int iterations = 0;

  // Best verifiably feasible iterate seen along the way (empty if none):
  // every block of F(best_x) passed an eigenvalue check at the primal
  // feasibility tolerance when it was recorded. On degenerate problems the
  // endgame can fail to certify optimality long after excellent feasible
  // points were visited; callers that only need feasibility plus a good
  // objective (certificate searches, monotone-descent steps) can fall back
  // to this point after checking it independently.
  Eigen::VectorXd best_x;
  double best_objective = 0.0;
};

// Primal-dual path-following interior-point solve (Mehrotra-style
// predictor-corrector, HKM direction, dense per-block factorizations).
// Deterministic: same problem and options give the same iterates.
SdpSolution solve(const SdpProblem& p, const SdpOptions& opts = {});

// Worst relative constraint violation of x: the largest of
// -lambda_min(F(x)) / (1 + |F0|_F) over blocks and (lb - x_i) / (1 + |lb|)
// over bounds. Nonpositive results mean x is (strictly) feasible.
double max_violation(const SdpProblem& p, const Eigen::VectorXd& x);

// SDPA sparse ".dat-s" export (upper-triangle entries, 17 significant
// digits); lower bounds become a diagonal block.
void export_sdpa(const SdpProblem& p, const std::string& path);

// Append the PSD block [[I, L x_sub], [(L x_sub)', t]] encoding
// t >= ||L x_sub||^2, where x_sub = x(var_indices).
void epigraph_of_norm_sq(SdpProblem& p, const Eigen::MatrixXd& L,
                         const std::vector<int>& var_indices, int t_index);

}  // namespace parafit
