#include "odsate/dataset.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace odsate {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& cell, long row, const std::string& column) {
  if (cell.empty())
    throw ParseError("row " + std::to_string(row) + ", column " + column + ": missing value");
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (errno != 0 || end == cell.c_str() || *end != '\0' || !std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ", column " + column +
                     ": not a finite real: '" + cell + "'");
  return value;
}

double parse_binary(const std::string& cell, long row, const std::string& column) {
  const double value = parse_real(cell, row, column);
  if (value != 0.0 && value != 1.0)
    throw ParseError("row " + std::to_string(row) + ", column " + column +
                     ": expected 0 or 1, got '" + cell + "'");
  return value;
}

}  // namespace

void ObservedSample::validate() const {
  const long rows = y_star.size();
  if (rows < 1) throw DomainError("n >= 1", "sample is empty");
  if (t.size() != rows || x.rows() != rows)
    throw DomainError("shared row count",
                      "y_star/t/x row counts differ: " + std::to_string(rows) + "/" +
                          std::to_string(t.size()) + "/" + std::to_string(x.rows()));
  if (static_cast<long>(kinds.size()) != x.cols())
    throw DomainError("covariate kinds per column",
                      "got " + std::to_string(kinds.size()) + " kinds for " +
                          std::to_string(x.cols()) + " columns");
  bool seen0 = false, seen1 = false;
  for (long i = 0; i < rows; ++i) {
    if (y_star[i] != 0.0 && y_star[i] != 1.0)
      throw DomainError("y_star in {0,1}", "row " + std::to_string(i + 1));
    if (t[i] != 0.0 && t[i] != 1.0)
      throw DomainError("t in {0,1}", "row " + std::to_string(i + 1));
    (y_star[i] == 1.0 ? seen1 : seen0) = true;
  }
  if (!seen0 || !seen1)
    throw DegenerateSample("y_star must contain both classes");
}

ObservedSample load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);

  auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<long>(j);
    throw SchemaError("missing column '" + name + "' in " + path);
  };

  const long y_col = column_index(schema.outcome_column);
  const long t_col = column_index(schema.treatment_column);

  std::vector<std::pair<std::string, long>> cov_cols;  // (name, header index)
  if (schema.covariates.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (static_cast<long>(j) != y_col && static_cast<long>(j) != t_col)
        cov_cols.emplace_back(header[j], static_cast<long>(j));
  } else {
    for (const auto& [name, kind] : schema.covariates) {
      (void)kind;
      cov_cols.emplace_back(name, column_index(name));
    }
  }

  std::vector<double> y, t;
  std::vector<std::vector<double>> x(cov_cols.size());
  std::vector<long> bad_rows;
  long row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) {
      bad_rows.push_back(row);
      continue;
    }
    y.push_back(parse_binary(cells[y_col], row, schema.outcome_column));
    t.push_back(parse_binary(cells[t_col], row, schema.treatment_column));
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      x[k].push_back(parse_real(cells[cov_cols[k].second], row, cov_cols[k].first));
  }
  if (!bad_rows.empty()) {
    std::string rows_msg;
    for (std::size_t i = 0; i < bad_rows.size() && i < 20; ++i)
      rows_msg += (i ? ", " : "") + std::to_string(bad_rows[i]);
    if (bad_rows.size() > 20) rows_msg += ", ...";
    throw ParseError("rows with missing fields: " + rows_msg);
  }
  if (y.empty()) throw ParseError("no data rows in " + path);

  ObservedSample sample;
  const long n = static_cast<long>(y.size());
  sample.y_star = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  sample.t = Eigen::Map<Eigen::VectorXd>(t.data(), n);
  sample.x.resize(n, static_cast<long>(cov_cols.size()));
  for (std::size_t k = 0; k < cov_cols.size(); ++k)
    sample.x.col(static_cast<long>(k)) = Eigen::Map<Eigen::VectorXd>(x[k].data(), n);

  for (std::size_t k = 0; k < cov_cols.size(); ++k) {
    sample.names.push_back(cov_cols[k].first);
    if (!schema.covariates.empty()) {
      sample.kinds.push_back(schema.covariates[k].second);
    } else {
      // Infer: a column whose values all lie in {0,1} is discrete.
      bool binary = true;
      for (double val : x[k])
        if (val != 0.0 && val != 1.0) {
          binary = false;
          break;
        }
      sample.kinds.push_back(binary ? CovariateKind::discrete : CovariateKind::continuous);
    }
  }
  return sample;
}

void save_dataset(const std::string& path, const ObservedSample& sample) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("cannot open file for writing: " + path);
  std::fputs("outcome_star,treatment", f);
  for (long j = 0; j < sample.d(); ++j) {
    const std::string name =
        j < static_cast<long>(sample.names.size()) ? sample.names[j] : "x" + std::to_string(j + 1);
    std::fprintf(f, ",%s", name.c_str());
  }
  std::fputc('\n', f);
  for (long i = 0; i < sample.n(); ++i) {
    std::fprintf(f, "%d,%d", static_cast<int>(sample.y_star[i]), static_cast<int>(sample.t[i]));
    for (long j = 0; j < sample.d(); ++j) std::fprintf(f, ",%.17g", sample.x(i, j));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

}  // namespace odsate
