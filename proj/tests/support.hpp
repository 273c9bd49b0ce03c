#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

#include "oracles/linear_oracle.hpp"

namespace test_support {

inline std::filesystem::path data_dir() { return SURVEYOR_DATA_DIR; }
inline std::filesystem::path test_dir() { return SURVEYOR_TEST_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("surveyor_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline oracle::Matrix to_oracle(const Eigen::MatrixXd& m) {
  oracle::Matrix out(static_cast<std::size_t>(m.rows()), oracle::Vector(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline oracle::Vector to_oracle(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Intercept plus `k` predictors with varied scales.
inline Eigen::MatrixXd random_design(std::mt19937_64& rng, int n, int k) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(n, k + 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (int j = 1; j <= k; ++j) x(i, j) = (j % 2 ? z(rng) * (1.0 + j) : u(rng) * 10.0 - 3.0);
  }
  return x;
}

}  // namespace test_support
