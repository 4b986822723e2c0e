#pragma once

// The universal sample container: feature columns, labels, confounder, and
// optional case weights, plus CSV I/O and column standardization.
//
// CSV layout: header `id,y,a,x1,...,xd`, UTF-8, comma separated, `.` decimal
// point. `y` must be 0/1 in files; in memory the label vector is stored as
// reals so that simulation code can carry a continuous response before
// binarization.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "confaudit/errors.hpp"

namespace confaudit {

struct Dataset {
  std::vector<std::vector<double>> x;  // feature columns, each of length n
  std::vector<double> y;               // labels ({0,1} for classifier-facing data)
  std::vector<double> a;               // confounder
  std::vector<double> weights;         // optional; empty means unweighted

  std::size_t n_rows() const { return y.size(); }
  std::size_t n_features() const { return x.size(); }

  bool has_weights() const { return !weights.empty(); }

  bool binary_labels() const {
    for (double v : y)
      if (v != 0.0 && v != 1.0) return false;
    return true;
  }

  void validate() const {
    if (y.size() < 2) throw SpecError("dataset needs at least 2 rows");
    if (a.size() != y.size()) throw DimensionError("confounder length != label length");
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j].size() != y.size())
        throw DimensionError("feature column x" + std::to_string(j + 1) +
                             " length != label length");
    if (!weights.empty()) {
      if (weights.size() != y.size())
        throw DimensionError("weights length != label length");
      double total = 0.0;
      for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw SpecError("weights must be nonnegative");
        total += w;
      }
      if (total <= 0.0) throw SpecError("at least one weight must be positive");
    }
  }

  void require_binary_labels() const {
    if (!binary_labels()) throw SpecError("labels must be 0/1");
  }

  // Row subset in the given index order; weights follow when present.
  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.x.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      out.x[j].reserve(idx.size());
      for (std::size_t i : idx) out.x[j].push_back(x[j][i]);
    }
    out.y.reserve(idx.size());
    out.a.reserve(idx.size());
    for (std::size_t i : idx) {
      out.y.push_back(y[i]);
      out.a.push_back(a[i]);
    }
    if (!weights.empty()) {
      out.weights.reserve(idx.size());
      for (std::size_t i : idx) out.weights.push_back(weights[i]);
    }
    return out;
  }
};

namespace detail {

// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("line " + std::to_string(line_no) + ": bad number `" + tok + "`");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(line);
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_csv(const Dataset& d, std::ostream& os) {
  d.validate();
  if (d.n_features() == 0) throw SpecError("dataset has no feature columns");
  os << "id,y,a";
  for (std::size_t j = 0; j < d.n_features(); ++j) os << ",x" << (j + 1);
  os << "\n";
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    os << (i + 1) << ',' << detail::format_double(d.y[i]) << ','
       << detail::format_double(d.a[i]);
    for (std::size_t j = 0; j < d.n_features(); ++j)
      os << ',' << detail::format_double(d.x[j][i]);
    os << "\n";
  }
}

inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open `" + path + "` for writing");
  write_csv(d, f);
  if (!f) throw IoError("write failed on `" + path + "`");
}

inline Dataset read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("line 1: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "y" || header[2] != "a")
    throw ParseError("line 1: header must be id,y,a,x1,...,xd");
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j)
    if (header[3 + j] != "x" + std::to_string(j + 1))
      throw ParseError("line 1: expected column x" + std::to_string(j + 1) + ", got `" +
                       header[3 + j] + "`");

  Dataset out;
  out.x.resize(d);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tok = detail::split_csv_line(line);
    if (tok.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(tok.size()));
    const double yv = detail::parse_double(tok[1], line_no);
    if (yv != 0.0 && yv != 1.0)
      throw ParseError("line " + std::to_string(line_no) + ": y must be 0 or 1");
    out.y.push_back(yv);
    out.a.push_back(detail::parse_double(tok[2], line_no));
    for (std::size_t j = 0; j < d; ++j)
      out.x[j].push_back(detail::parse_double(tok[3 + j], line_no));
  }
  out.validate();
  return out;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open `" + path + "`");
  return read_csv(f);
}

namespace detail {

inline void standardize_column(std::vector<double>& col, const std::string& name) {
  const std::size_t n = col.size();
  double m = 0.0;
  for (double v : col) m += v;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : col) ss += (v - m) * (v - m);
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0.0) throw DegenerateColumnError("column `" + name + "` has zero variance");
  const double sd = std::sqrt(var);
  for (double& v : col) v = (v - m) / sd;
}

}  // namespace detail

// Center every feature column and the confounder to mean 0, variance 1
// (1/(n-1) convention). Labels are untouched; pass include_y = true to also
// standardize a continuous response.
inline Dataset standardize(const Dataset& d, bool include_y = false) {
  d.validate();
  Dataset out = d;
  for (std::size_t j = 0; j < out.x.size(); ++j)
    detail::standardize_column(out.x[j], "x" + std::to_string(j + 1));
  detail::standardize_column(out.a, "a");
  if (include_y) detail::standardize_column(out.y, "y");
  return out;
}

}  // namespace confaudit
