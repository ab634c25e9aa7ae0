// Command-line frontend: benchmark generation, model fitting, a-posteriori
// stability verification, plot-data evaluation, and SDP export.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "CLI11.hpp"
#include "json.hpp"
#include "parafit/dataset.hpp"
#include "parafit/errors.hpp"
#include "parafit/fitting.hpp"
#include "parafit/io_json.hpp"
#include "parafit/model.hpp"
#include "parafit/sobol.hpp"
#include "parafit/stability.hpp"
#include "parafit/verify.hpp"

namespace {

using parafit::ConfigError;
using parafit::DataError;

// ---------------------------------------------------------------------------
// Flat key=value config files
// ---------------------------------------------------------------------------

struct Config {
  std::map<std::string, std::string> kv;
  std::string path;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  const std::string& require(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }
  std::string get(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  double get_double(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing junk");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
  }
  int get_int(const std::string& key, int dflt) const {
    const double v = get_double(key, static_cast<double>(dflt));
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("config key " + key + ": not an integer");
    return i;
  }
  int require_int(const std::string& key) const {
    require(key);
    return get_int(key, 0);
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg;
  cfg.path = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.kv[key] = val;
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.empty()) out.push_back(trim(s));
  return out;
}

// ---------------------------------------------------------------------------
// Shared fit plumbing
// ---------------------------------------------------------------------------

parafit::Dataset load_dataset(const std::string& path) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    const parafit::DatasetManifest man = parafit::load_manifest(path);
    std::string csv = man.csv_path;
    if (!csv.empty() && csv.front() != '/') {
      const auto slash = path.find_last_of('/');
      if (slash != std::string::npos) csv = path.substr(0, slash + 1) + csv;
    }
    return parafit::load_csv(csv);
  }
  return parafit::load_csv(path);
}

parafit::Parameterization param_from_config(const Config& cfg, int k) {
  std::vector<std::string> kinds = split_list(cfg.require("param.kind"));
  std::vector<std::string> rhos = split_list(cfg.require("param.rho"));
  if (static_cast<int>(kinds.size()) == 1 && k > 1) kinds.assign(k, kinds[0]);
  if (static_cast<int>(rhos.size()) == 1 && k > 1) rhos.assign(k, rhos[0]);
  if (static_cast<int>(kinds.size()) != k || static_cast<int>(rhos.size()) != k)
    throw ConfigError("param.kind / param.rho must list one entry per parameter (k=" +
                      std::to_string(k) + ")");
  const double h = cfg.get_double("h", 0.5);

  std::vector<parafit::UnivariateRealization> parts;
  for (int d = 0; d < k; ++d) {
    int rho = 0;
    try {
      rho = std::stoi(rhos[d]);
    } catch (const std::exception&) {
      throw ConfigError("config key param.rho: not an integer: " + rhos[d]);
    }
    const parafit::BasisKind kind = parafit::basis_kind_from_string(kinds[d]);
    switch (kind) {
      case parafit::BasisKind::Monomial:
        parts.push_back(parafit::build_monomial(rho - 1));
        break;
      case parafit::BasisKind::Chebyshev:
        parts.push_back(parafit::build_chebyshev(rho - 1));
        break;
      case parafit::BasisKind::PartialFraction:
        parts.push_back(parafit::build_partial_fraction(rho, h));
        break;
    }
  }
  return parafit::tensor_product(parts);
}

parafit::SdpOptions sdp_from_config(const Config& cfg) {
  parafit::SdpOptions opts;
  opts.gap_tol = cfg.get_double("sdp.gap_tol", opts.gap_tol);
  opts.feas_tol = cfg.get_double("sdp.feas_tol", opts.feas_tol);
  opts.max_iter = cfg.get_int("sdp.max_iter", opts.max_iter);
  return opts;
}

parafit::AlgorithmOptions algo_from_config(const Config& cfg) {
  parafit::AlgorithmOptions o;
  o.n_psk = cfg.get_int("n_psk", 5);
  o.n_ico = cfg.get_int("n_ico", 20);
  o.delta_bar = cfg.get_int("delta_bar", 6);
  o.eps_ico = cfg.get_double("eps_ico", 1e-2);
  o.weight_exponent = cfg.get_double("sk_weight_exponent", 1.0);
  o.sdp = sdp_from_config(cfg);
  return o;
}

// Unconstrained Sanathanan-Koerner baseline: per round, the unit-norm
// denominator coefficient vector minimizing ||L vec(beta)|| (smallest right
// singular vector), then weight refresh.
std::pair<parafit::BarycentricModel, double> psk_baseline(
    const parafit::Dataset& data, const parafit::Parameterization& param,
    const parafit::BasisPoles& poles, int n_psk, double weight_exponent) {
  if (n_psk < 1) throw ConfigError("the fit loop needs at least one iteration");
  const int nu = poles.nu();
  const int rho = param.rho;
  Eigen::VectorXd weights =
      Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.samples.size()));

  parafit::BarycentricModel model;
  model.param = param;
  model.poles = poles;
  model.alpha = Eigen::MatrixXd::Zero(rho, nu + 1);
  model.beta = Eigen::MatrixXd::Zero(rho, nu + 1);

  for (int ell = 1; ell <= n_psk; ++ell) {
    parafit::RegressionSystem sys =
        parafit::eliminate_numerator(parafit::assemble(data, param, poles, weights));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.L, Eigen::ComputeThinV);
    const Eigen::VectorXd v = svd.matrixV().col(sys.L.cols() - 1);
    model.beta = Eigen::Map<const Eigen::MatrixXd>(v.data(), rho, nu + 1);
    weights = parafit::psk_update_weights(model, data, weight_exponent);
  }
  parafit::RegressionSystem fin =
      parafit::eliminate_numerator(parafit::assemble(data, param, poles, weights));
  model.alpha = parafit::recover_numerator(fin, model.beta);
  return {model, fin.reduced_cost(model.beta)};
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json config_echo(const Config& cfg) {
  nlohmann::json j;
  for (const auto& [k, v] : cfg.kv) j[k] = v;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parafit: stable multivariate rational transfer-function fitting"};
  app.require_subcommand(1);

  // --- gen-penzl ---
  auto* gen = app.add_subcommand("gen-penzl", "Generate the synthetic benchmark dataset");
  int g_freqs = 2000, g_thetas = 50;
  double g_flo = 1.0, g_fhi = 100.0;
  std::string g_out;
  gen->add_option("--freqs", g_freqs, "Number of frequency points");
  gen->add_option("--thetas", g_thetas, "Number of parameter values");
  gen->add_option("--f-lo", g_flo, "Lower frequency bound (Hz)");
  gen->add_option("--f-hi", g_fhi, "Upper frequency bound (Hz)");
  gen->add_option("--out", g_out, "Output CSV path")->required();

  // --- fit ---
  auto* fit = app.add_subcommand("fit", "Fit a rational model to sampled data");
  std::string f_data, f_config, f_mode = "stable", f_out, f_report;
  fit->add_option("--data", f_data, "Dataset CSV (or JSON manifest)")->required();
  fit->add_option("--config", f_config, "key=value config file")->required();
  fit->add_option("--mode", f_mode, "psk | esp | stable")
      ->check(CLI::IsMember({"psk", "esp", "stable"}));
  fit->add_option("--out", f_out, "Output model JSON")->required();
  fit->add_option("--report", f_report, "Fit report JSON");

  // --- verify ---
  auto* ver = app.add_subcommand("verify", "Check a fitted model's stability and error");
  std::string v_model, v_data, v_out;
  int v_grid = 100, v_freqs = 400;
  ver->add_option("--model", v_model, "Model JSON")->required();
  ver->add_option("--data", v_data, "Dataset CSV (or JSON manifest)")->required();
  ver->add_option("--grid", v_grid, "Number of Sobol parameter points");
  ver->add_option("--esp-freqs", v_freqs, "Frequency grid size per parameter point");
  ver->add_option("--out", v_out, "Report JSON path");

  // --- eval ---
  auto* ev = app.add_subcommand("eval", "Tabulate model response at one parameter point");
  std::string e_model, e_theta, e_grid = "1:100:400:log", e_out;
  ev->add_option("--model", e_model, "Model JSON")->required();
  ev->add_option("--theta", e_theta, "Comma-separated parameter values")->required();
  ev->add_option("--f-grid", e_grid, "Frequency grid lo:hi:n[:lin|log] (Hz)");
  ev->add_option("--out", e_out, "Output CSV path")->required();

  // --- export-sdpa ---
  auto* ex = app.add_subcommand("export-sdpa", "Write an assembled SDP in SDPA format");
  std::string x_data, x_config, x_stage = "esp", x_out;
  ex->add_option("--data", x_data, "Dataset CSV (or JSON manifest)")->required();
  ex->add_option("--config", x_config, "key=value config file")->required();
  ex->add_option("--stage", x_stage, "esp | feasibility")
      ->check(CLI::IsMember({"esp", "feasibility"}));
  ex->add_option("--out", x_out, "Output .dat-s path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const parafit::Dataset d = parafit::generate_penzl(g_freqs, g_thetas, {g_flo, g_fhi});
      parafit::save_csv(d, g_out);
      std::cout << "wrote " << d.samples.size() << " samples to " << g_out << "\n";
      return 0;
    }

    if (fit->parsed()) {
      const auto t0 = std::chrono::steady_clock::now();
      const Config cfg = load_config(f_config);
      const parafit::Dataset data = load_dataset(f_data);
      const int nu = cfg.require_int("nu");
      const int passes = cfg.get_int("relocation_passes", 3);
      const parafit::Parameterization param = param_from_config(cfg, data.k);
      const parafit::BasisPoles poles = parafit::heuristic_basis_poles(data, nu, passes);
      const parafit::AlgorithmOptions opts = algo_from_config(cfg);
      const double load_s = seconds_since(t0);

      const auto t1 = std::chrono::steady_clock::now();
      parafit::BarycentricModel model;
      std::vector<double> gamma_history;
      int delta_bar_used = opts.delta_bar;
      if (f_mode == "psk") {
        auto [m, g] = psk_baseline(data, param, poles, opts.n_psk, opts.weight_exponent);
        model = std::move(m);
        gamma_history.push_back(g);
      } else if (f_mode == "esp") {
        auto [m, g] = parafit::psk_esp_loop(data, param, poles, opts.n_psk,
                                            opts.delta_bar, opts.sdp,
                                            opts.weight_exponent);
        model = std::move(m);
        gamma_history.push_back(g);
      } else {
        parafit::Algorithm1Result res = parafit::run_algorithm1(data, param, poles, opts);
        model = std::move(res.model);
        gamma_history = std::move(res.gamma_history);
        delta_bar_used = res.delta_bar_used;
      }
      const double fit_s = seconds_since(t1);

      parafit::save_model(model, f_out);
      int excluded = 0;
      const double rms = parafit::rms_error(model, data, &excluded);
      if (excluded > 0)
        std::cerr << "warning: " << excluded
                  << " sample(s) hit a model pole and were excluded from the RMS\n";

      if (!f_report.empty()) {
        nlohmann::json rep;
        rep["mode"] = f_mode;
        rep["gamma_history"] = gamma_history;
        rep["delta_bar_used"] = delta_bar_used;
        rep["rms_error"] = rms;
        rep["excluded_samples"] = excluded;
        rep["timings"] = {{"load_s", load_s}, {"fit_s", fit_s}};
        rep["config"] = config_echo(cfg);
        rep["data_file"] = f_data;
        rep["samples"] = data.samples.size();
        parafit::write_text_file(f_report, rep.dump(2) + "\n");
      }
      std::cout << "mode=" << f_mode << " rms=" << rms
                << " gamma0=" << gamma_history.front()
                << " gamma=" << gamma_history.back() << " wrote " << f_out << "\n";
      return 0;
    }

    if (ver->parsed()) {
      const parafit::BarycentricModel model = parafit::load_model(v_model);
      const parafit::Dataset data = load_dataset(v_data);
      const parafit::StabilityReport rep = parafit::check_stability_grid(model, v_grid);
      double margin = std::numeric_limits<double>::infinity();
      for (const Eigen::VectorXd& th : parafit::sobol_points(v_grid, model.k()))
        margin = std::min(margin, parafit::esp_margin(model, th, v_freqs));
      int excluded = 0;
      const double rms = parafit::rms_error(model, data, &excluded);
      if (excluded > 0)
        std::cerr << "warning: " << excluded
                  << " sample(s) hit a model pole and were excluded from the RMS\n";
      const std::string json = parafit::verify_report_json(rep, margin, rms, v_grid);
      if (!v_out.empty()) parafit::write_text_file(v_out, json);
      std::cout << json;
      return rep.pass ? 0 : 1;
    }

    if (ev->parsed()) {
      const parafit::BarycentricModel model = parafit::load_model(e_model);
      Eigen::VectorXd theta(model.k());
      {
        const std::vector<std::string> vals = split_list(e_theta);
        if (static_cast<int>(vals.size()) != model.k())
          throw ConfigError("--theta needs exactly " + std::to_string(model.k()) +
                            " value(s)");
        for (int i = 0; i < model.k(); ++i) theta(i) = std::stod(vals[i]);
      }
      const std::vector<std::string> g = split_list([&] {
        std::string s = e_grid;
        for (char& c : s)
          if (c == ':') c = ',';
        return s;
      }());
      if (g.size() < 3) throw ConfigError("--f-grid must be lo:hi:n[:lin|log]");
      const double lo = std::stod(g[0]), hi = std::stod(g[1]);
      const int n = std::stoi(g[2]);
      const bool logsp = g.size() > 3 ? g[3] == "log" : false;
      if (n < 2 || lo <= 0.0 || hi <= lo)
        throw ConfigError("--f-grid: need 0 < lo < hi and n >= 2");

      std::ostringstream out;
      out << "f,abs_H,re_H,im_H\n";
      out.precision(17);
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        const double f = logsp ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
        const std::complex<double> s(0.0, 2.0 * M_PI * f);
        const std::complex<double> H = parafit::eval_H(model, s, theta);
        out << f << ',' << std::abs(H) << ',' << H.real() << ',' << H.imag() << "\n";
      }
      parafit::write_text_file(e_out, out.str());
      std::cout << "wrote " << n << " rows to " << e_out << "\n";
      return 0;
    }

    if (ex->parsed()) {
      const Config cfg = load_config(x_config);
      const parafit::Dataset data = load_dataset(x_data);
      const int nu = cfg.require_int("nu");
      const int passes = cfg.get_int("relocation_passes", 3);
      const parafit::Parameterization param = param_from_config(cfg, data.k);
      const parafit::BasisPoles poles = parafit::heuristic_basis_poles(data, nu, passes);
      const parafit::AlgorithmOptions opts = algo_from_config(cfg);
      const Eigen::VectorXd w =
          Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.samples.size()));

      if (x_stage == "esp") {
        parafit::RegressionSystem sys =
            parafit::eliminate_numerator(parafit::assemble(data, param, poles, w));
        const parafit::StabilitySdp s =
            parafit::assemble_esp_sdp(sys.L, param, poles, opts.delta_bar);
        parafit::export_sdpa(s.prob, x_out);
      } else {
        // Certificate-search SDP for the unconstrained baseline fit (no SDP
        // solves needed to produce the subject model).
        auto [model, g] =
            psk_baseline(data, param, poles, opts.n_psk, opts.weight_exponent);
        (void)g;
        const parafit::StabilitySdp s =
            parafit::assemble_feasibility_sdp(model, opts.delta_bar);
        parafit::export_sdpa(s.prob, x_out);
      }
      std::cout << "wrote " << x_out << "\n";
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const parafit::CertificateError& e) {
    std::cerr << "certificate error: " << e.what() << "\n";
    return 5;
  } catch (const parafit::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
