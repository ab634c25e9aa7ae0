#include <cmath>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include "parafit/errors.hpp"
#include "parafit/sdp.hpp"

namespace parafit {

namespace {

// One value formatted with 17 significant digits, as used everywhere in the
// exported file.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

// SDPA sparse format solves  min c.x  s.t.  sum_i x_i F_i - F0 >= 0  per
// block, so the constant term is emitted with its sign flipped relative to
// the internal convention  F0 + sum_i x_i F_i >= 0.  Lower bounds x_i >= l
// become one trailing diagonal block.  Entries smaller than 1e-300 in
// magnitude are omitted.
void export_sdpa(const SdpProblem& p, const std::string& path) {
  for (const auto& b : p.blocks) {
    if (b.F0.rows() != b.size || b.F0.cols() != b.size)
      throw ConfigError("SDP export: block constant term has wrong shape");
    for (int v : b.vars)
      if (v < 0 || v >= p.n_vars)
        throw ConfigError("SDP export: block references unknown variable");
  }
  for (const auto& bd : p.lower_bounds)
    if (bd.first < 0 || bd.first >= p.n_vars)
      throw ConfigError("SDP export: bound references unknown variable");

  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot open '" + path + "' for writing");

  const int n_bounds = static_cast<int>(p.lower_bounds.size());
  const int n_blocks = static_cast<int>(p.blocks.size()) + (n_bounds > 0 ? 1 : 0);

  std::fprintf(f, "* parafit export-sdpa\n");
  std::fprintf(f, "%d\n", p.n_vars);
  std::fprintf(f, "%d\n", n_blocks);
  {
    std::string sizes;
    for (const auto& b : p.blocks) {
      if (!sizes.empty()) sizes += ' ';
      sizes += std::to_string(b.size);
    }
    if (n_bounds > 0) {
      if (!sizes.empty()) sizes += ' ';
      sizes += std::to_string(-n_bounds);
    }
    std::fprintf(f, "%s\n", sizes.c_str());
  }
  {
    std::string obj;
    for (int i = 0; i < p.n_vars; ++i) {
      if (i > 0) obj += ' ';
      obj += fmt(i < p.objective.size() ? p.objective(i) : 0.0);
    }
    std::fprintf(f, "%s\n", obj.c_str());
  }

  const auto emit = [&](int matno, int blkno, int i, int j, double v) {
    if (std::abs(v) < 1e-300) return;
    std::fprintf(f, "%d %d %d %d %s\n", matno, blkno, i + 1, j + 1, fmt(v).c_str());
  };

  // matno 0: the flipped constant terms.
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const auto& b = p.blocks[bi];
    for (int i = 0; i < b.size; ++i)
      for (int j = i; j < b.size; ++j) emit(0, static_cast<int>(bi) + 1, i, j, -b.F0(i, j));
  }
  for (int k = 0; k < n_bounds; ++k)
    emit(0, static_cast<int>(p.blocks.size()) + 1, k, k, p.lower_bounds[k].second);

  // matno 1..n: per-variable coefficient matrices, in variable order.
  std::vector<std::unordered_map<int, int>> local(p.blocks.size());
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi)
    for (std::size_t l = 0; l < p.blocks[bi].vars.size(); ++l)
      local[bi].emplace(p.blocks[bi].vars[l], static_cast<int>(l));

  for (int var = 0; var < p.n_vars; ++var) {
    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
      auto it = local[bi].find(var);
      if (it == local[bi].end()) continue;
      const Eigen::MatrixXd F = p.blocks[bi].coeff_matrix(it->second);
      for (int i = 0; i < F.rows(); ++i)
        for (int j = i; j < F.cols(); ++j) emit(var + 1, static_cast<int>(bi) + 1, i, j, F(i, j));
    }
    for (int k = 0; k < n_bounds; ++k)
      if (p.lower_bounds[k].first == var)
        emit(var + 1, static_cast<int>(p.blocks.size()) + 1, k, k, 1.0);
  }

  if (std::fclose(f) != 0) throw DataError("error writing '" + path + "'");
}

}  // namespace parafit
