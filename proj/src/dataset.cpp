#include "epmix/dataset.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epmix/random.hpp"

namespace epmix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  // strip a UTF-8 byte order mark
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
  auto end_row = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
    bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row.clear();
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("CSV ends inside a quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

Dataset dataset_from_csv_text(const std::string& text, const std::string& response, bool standardize,
                              const std::string& name) {
  const auto rows = parse_csv(text);
  if (rows.size() < 2) throw DataError("CSV needs a header row and at least one data row");
  const auto& header = rows.front();
  std::size_t response_col = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (trim(header[j]) == response) response_col = j;
  }
  if (response_col == header.size()) throw DataError("response column '" + response + "' not found in header");
  if (header.size() < 2) throw DataError("CSV needs at least one covariate column");

  const auto m = static_cast<Eigen::Index>(rows.size() - 1);
  const auto n2 = static_cast<Eigen::Index>(header.size() - 1);
  Dataset data;
  data.name = name;
  data.response = response;
  data.y.resize(m);
  data.X.resize(m, n2);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != response_col) data.covariates.push_back(trim(header[j]));
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r) + 1];
    const std::size_t line = static_cast<std::size_t>(r) + 2;
    if (row.size() != header.size()) {
      throw DataError("row " + std::to_string(line) + " has " + std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      double v = 0.0;
      if (!parse_double(row[j], v)) {
        throw DataError("non-numeric or missing value at row " + std::to_string(line) + ", column '" +
                        trim(header[j]) + "'");
      }
      if (j == response_col) {
        data.y[r] = v;
      } else {
        data.X(r, col++) = v;
      }
    }
  }
  if (standardize) {
    if (m < 2) throw DataError("standardization needs at least two rows");
    for (Eigen::Index j = 0; j < n2; ++j) {
      auto c = data.X.col(j);
      const double mean = c.mean();
      c.array() -= mean;
      const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(m - 1));
      if (!(sd > 0.0)) throw DataError("column '" + data.covariates[static_cast<std::size_t>(j)] + "' has zero variance");
      c /= sd;
    }
    data.y.array() -= data.y.mean();
    data.standardized = true;
  }
  return data;
}

Dataset load_dataset(const std::string& path, const std::string& response, bool standardize) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv_text(buf.str(), response, standardize, std::filesystem::path(path).stem().string());
}

Dataset make_synthetic_regression(std::size_t m, std::size_t n2, std::uint64_t seed, double sigma2, double rho) {
  Rng rng(seed, {0x5e17});
  Dataset data;
  data.name = "synthetic";
  data.response = "y";
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(n2);
  data.X.resize(rows, cols);
  const double innov = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double prev = rng.normal();
    data.X(i, 0) = prev;
    for (Eigen::Index j = 1; j < cols; ++j) {
      prev = rho * prev + innov * rng.normal();
      data.X(i, j) = prev;
    }
  }
  // a few strong effects, several weak ones, the rest exactly zero
  Eigen::VectorXd z = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (j % 4 == 0) z[j] = rng.sign() * (0.5 + rng.uniform());
    else if (j % 4 == 1) z[j] = 0.15 * rng.normal();
  }
  data.y = data.X * z;
  const double sd = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < rows; ++i) data.y[i] += sd * rng.normal();
  for (Eigen::Index j = 0; j < cols; ++j) data.covariates.push_back("x" + std::to_string(j + 1));
  return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << data.response;
  for (const auto& c : data.covariates) out << ',' << c;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", data.y[i]);
    out << buf;
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.10g", data.X(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace epmix
