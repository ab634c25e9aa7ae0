#include "parafit/dataset.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parafit/errors.hpp"

namespace parafit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Contribution of a 2x2 block [[-1, w], [-w, -1]] observed through (1, 0):
// (1 0) [sI - A]^-1 (1 0)^T = (s+1) / ((s+1)^2 + w^2).
std::complex<double> rotation_block(std::complex<double> s, double w) {
  const std::complex<double> sp1 = s + 1.0;
  return sp1 / (sp1 * sp1 + w * w);
}

}  // namespace

std::complex<double> penzl_H(std::complex<double> s, double theta1) {
  std::complex<double> h = rotation_block(s, 100.0 * (0.5 + theta1)) +
                           rotation_block(s, 200.0) + rotation_block(s, 400.0);
  for (int m = 1; m <= 1000; ++m) h += 1.0 / (s + static_cast<double>(m));
  return h;
}

Dataset generate_penzl(int n_freq, int n_theta, std::pair<double, double> f_range) {
  if (n_freq < 1 || n_theta < 1)
    throw ConfigError("generate_penzl: counts must be >= 1");
  Dataset d;
  d.k = 1;
  d.samples.reserve(static_cast<std::size_t>(n_freq) * n_theta);
  for (int i = 0; i < n_freq; ++i) {
    const double f =
        n_freq == 1 ? f_range.first
                    : f_range.first + (f_range.second - f_range.first) * i / (n_freq - 1);
    const std::complex<double> s(0.0, 2.0 * kPi * f);
    // Everything except the first block is theta-independent; hoist it.
    std::complex<double> base = rotation_block(s, 200.0) + rotation_block(s, 400.0);
    for (int m = 1; m <= 1000; ++m) base += 1.0 / (s + static_cast<double>(m));
    for (int j = 0; j < n_theta; ++j) {
      const double t = n_theta == 1 ? 0.0 : static_cast<double>(j) / (n_theta - 1);
      SamplePoint p;
      p.s = s;
      p.theta = Eigen::VectorXd::Constant(1, t);
      p.H = base + rotation_block(s, 100.0 * (0.5 + t));
      d.samples.push_back(std::move(p));
    }
  }
  d.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.samples.size()));
  return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& field, int line_no) {
  const std::string t = trim(field);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw DataError("CSV line " + std::to_string(line_no) + ": cannot parse number '" +
                    field + "'");
  if (!std::isfinite(value))
    throw DataError("CSV line " + std::to_string(line_no) + ": non-finite value");
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file is empty: " + path);

  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 5)
    throw DataError("CSV header must have at least 5 columns (re_s, im_s, theta_1, "
                    "re_H, im_H), got " + std::to_string(header.size()));
  if (trim(header[0]) != "re_s" || trim(header[1]) != "im_s")
    throw DataError("CSV header must start with re_s, im_s");
  const int k = static_cast<int>(header.size()) - 4;
  for (int j = 0; j < k; ++j) {
    const std::string expect = "theta_" + std::to_string(j + 1);
    if (trim(header[2 + j]) != expect)
      throw DataError("CSV header column " + std::to_string(3 + j) + " must be '" +
                      expect + "', got '" + trim(header[2 + j]) + "'");
  }
  if (trim(header[2 + k]) != "re_H" || trim(header[3 + k]) != "im_H")
    throw DataError("CSV header must end with re_H, im_H");

  Dataset d;
  d.k = k;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    SamplePoint p;
    p.s = {parse_double(fields[0], line_no), parse_double(fields[1], line_no)};
    p.theta.resize(k);
    for (int j = 0; j < k; ++j) {
      const double t = parse_double(fields[2 + j], line_no);
      if (t < 0.0 || t > 1.0)
        throw DataError("CSV line " + std::to_string(line_no) + ": theta_" +
                        std::to_string(j + 1) + " = " + std::to_string(t) +
                        " outside [0,1]");
      p.theta(j) = t;
    }
    p.H = {parse_double(fields[2 + k], line_no), parse_double(fields[3 + k], line_no)};
    d.samples.push_back(std::move(p));
  }
  if (d.samples.empty()) throw DataError("CSV file has no data rows: " + path);
  d.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.samples.size()));
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  if (d.samples.empty()) throw DataError("save_csv: dataset has no samples");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot open file for writing: " + tmp);
    out << "re_s,im_s";
    for (int j = 1; j <= d.k; ++j) out << ",theta_" << j;
    out << ",re_H,im_H\n";
    char buf[64];
    auto put = [&](double v, char sep) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << buf << sep;
    };
    for (const SamplePoint& p : d.samples) {
      if (p.theta.size() != d.k)
        throw DataError("save_csv: sample theta dimension mismatch");
      put(p.s.real(), ',');
      put(p.s.imag(), ',');
      for (int j = 0; j < d.k; ++j) put(p.theta(j), ',');
      put(p.H.real(), ',');
      put(p.H.imag(), '\n');
    }
    if (!out) throw DataError("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace parafit
