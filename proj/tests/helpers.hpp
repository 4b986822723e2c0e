#pragma once

// Shared test utilities: scratch directories, file slurping, and small
// simulation helpers used across suites.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "confaudit/rng.hpp"

namespace test_helpers {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("confaudit_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::vector<double> normal_vector(std::size_t n, std::uint64_t seed) {
  confaudit::Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

inline std::vector<double> bernoulli_vector(std::size_t n, double p, std::uint64_t seed) {
  confaudit::Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.bernoulli(p) ? 1.0 : 0.0;
  return out;
}

// Kolmogorov-Smirnov distance to Uniform(0,1).
inline double ks_uniform(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double d = 0.0;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, std::abs(values[i] - lo), std::abs(values[i] - hi)});
  }
  return d;
}

}  // namespace test_helpers
