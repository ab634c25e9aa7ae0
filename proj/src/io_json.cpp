#include "parafit/io_json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "parafit/errors.hpp"
#include "parafit/parameterization.hpp"

namespace parafit {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& M) {
  json j;
  j["rows"] = static_cast<int>(M.rows());
  j["cols"] = static_cast<int>(M.cols());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index c = 0; c < M.cols(); ++c) data.push_back(M(i, c));
  j["data"] = data;
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data"))
    throw DataError(std::string("model file: malformed matrix object for ") + what);
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw DataError(std::string("model file: matrix shape mismatch for ") + what);
  Eigen::MatrixXd M(rows, cols);
  std::size_t p = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) M(i, c) = data[p++];
  return M;
}

}  // namespace

std::string model_to_json(const BarycentricModel& m) {
  json j;
  j["format"] = "parafit-model-v1";
  j["s_scale"] = m.poles.s_scale;
  json sigma = json::array();
  for (const auto& z : m.poles.sigma) sigma.push_back({z.real(), z.imag()});
  j["sigma"] = sigma;

  json parts = json::array();
  for (const UnivariateRealization& u : m.param.parts) {
    json p;
    p["kind"] = to_string(u.kind);
    p["rho"] = u.rho;
    p["degree"] = u.degree;
    p["h"] = u.h;
    parts.push_back(p);
  }
  j["parameterization"] = json{{"parts", parts}};
  j["alpha"] = matrix_to_json(m.alpha);
  j["beta"] = matrix_to_json(m.beta);
  return j.dump(2) + "\n";
}

BarycentricModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: JSON parse error: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "parafit-model-v1")
      throw DataError("model file: unknown or missing format tag");

    std::vector<std::complex<double>> sigma;
    for (const auto& z : j.at("sigma")) {
      if (!z.is_array() || z.size() != 2)
        throw DataError("model file: pole entries must be [re, im] pairs");
      sigma.emplace_back(z[0].get<double>(), z[1].get<double>());
    }

    std::vector<UnivariateRealization> parts;
    for (const auto& p : j.at("parameterization").at("parts")) {
      const BasisKind kind = basis_kind_from_string(p.at("kind").get<std::string>());
      switch (kind) {
        case BasisKind::Monomial:
          parts.push_back(build_monomial(p.at("degree").get<int>()));
          break;
        case BasisKind::Chebyshev:
          parts.push_back(build_chebyshev(p.at("degree").get<int>()));
          break;
        case BasisKind::PartialFraction:
          parts.push_back(
              build_partial_fraction(p.at("rho").get<int>(), p.at("h").get<double>()));
          break;
      }
      const auto& q = p;
      const UnivariateRealization& u = parts.back();
      if (u.rho != q.at("rho").get<int>())
        throw DataError("model file: basis descriptor is inconsistent");
    }

    BarycentricModel m;
    m.param = tensor_product(parts);
    m.poles = make_basis_poles(sigma, j.at("s_scale").get<double>());
    m.alpha = matrix_from_json(j.at("alpha"), "alpha");
    m.beta = matrix_from_json(j.at("beta"), "beta");
    if (m.alpha.rows() != m.param.rho || m.alpha.cols() != m.nu() + 1 ||
        m.beta.rows() != m.param.rho || m.beta.cols() != m.nu() + 1)
      throw DataError("model file: coefficient shapes do not match the basis");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: missing or mistyped field: ") + e.what());
  }
}

void save_model(const BarycentricModel& m, const std::string& path) {
  write_text_file(path, model_to_json(m));
}

BarycentricModel load_model(const std::string& path) {
  return model_from_json(read_text_file(path));
}

DatasetManifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: JSON parse error: ") + e.what());
  }
  DatasetManifest man;
  if (!j.contains("csv_path") || !j.at("csv_path").is_string())
    throw DataError("manifest: missing csv_path");
  man.csv_path = j.at("csv_path").get<std::string>();
  man.k = j.value("k", 0);
  man.description = j.value("description", std::string());
  man.f_unit = j.value("f_unit", std::string());
  return man;
}

std::string verify_report_json(const StabilityReport& rep, double esp_margin_min,
                               double rms, int grid_points) {
  json j;
  j["pass"] = rep.pass;
  j["max_re_zero"] = rep.max_re_zero;
  std::vector<double> th(rep.argmax_theta.data(),
                         rep.argmax_theta.data() + rep.argmax_theta.size());
  j["argmax_theta"] = th;
  j["min_abs_d"] = rep.min_abs_d;
  j["n_zero_at_infinity"] = rep.n_zero_at_infinity;
  j["esp_margin_min"] = esp_margin_min;
  j["rms_error"] = rms;
  j["grid_points"] = grid_points;
  j["grid_sequence"] = "joe-kuo-sobol";
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("read failure: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + tmp);
    out << text;
    out.flush();
    if (!out.good()) throw DataError("write failure: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("cannot move temp file into place: " + path);
  }
}

}  // namespace parafit
