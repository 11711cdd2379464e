#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epmix {

/// Malformed or unusable input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> covariates;
  std::string response;
  bool standardized = false;
};

/// Parses RFC-4180 style CSV text into header + rows of raw fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Reads a numeric CSV with a header row. y is the response column and X the
/// remaining columns in file order. With `standardize`, X columns are
/// centered and scaled to unit sample variance and y is centered.
Dataset load_dataset(const std::string& path, const std::string& response, bool standardize);
Dataset dataset_from_csv_text(const std::string& text, const std::string& response, bool standardize,
                              const std::string& name = "data");

/// y = X z + e with unit-variance covariates of correlation rho^|i-j|, a
/// sparse coefficient vector and noise variance sigma2.
Dataset make_synthetic_regression(std::size_t m, std::size_t n2, std::uint64_t seed, double sigma2 = 1.0,
                                  double rho = 0.5);

void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace epmix
