#include "ppl/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/models.hpp"
#include "ppl/random.hpp"

namespace ppl {

LabelRule LabelRule::parse(const std::string& text) {
  LabelRule rule;
  if (text.empty()) return rule;
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw DataError("label rule '" + text + "' must look like op:value, e.g. eq:2");
  std::string op = text.substr(0, colon);
  std::string num = text.substr(colon + 1);
  if (op == "eq") rule.kind = Kind::eq;
  else if (op == "gt") rule.kind = Kind::gt;
  else if (op == "ge") rule.kind = Kind::ge;
  else if (op == "lt") rule.kind = Kind::lt;
  else if (op == "le") rule.kind = Kind::le;
  else throw DataError("label rule operator '" + op + "' not one of eq, gt, ge, lt, le");
  char* end = nullptr;
  rule.threshold = std::strtod(num.c_str(), &end);
  if (end == num.c_str() || *end != '\0')
    throw DataError("label rule value '" + num + "' is not a number");
  return rule;
}

double LabelRule::apply(double raw, std::size_t row) const {
  switch (kind) {
    case Kind::identity:
      if (raw != 0.0 && raw != 1.0)
        throw DataError("label at row " + std::to_string(row) + " is " + std::to_string(raw) +
                        ", expected 0 or 1 (pass a label rule to binarize)");
      return raw;
    case Kind::eq: return raw == threshold ? 1.0 : 0.0;
    case Kind::gt: return raw > threshold ? 1.0 : 0.0;
    case Kind::ge: return raw >= threshold ? 1.0 : 0.0;
    case Kind::lt: return raw < threshold ? 1.0 : 0.0;
    case Kind::le: return raw <= threshold ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  char* end = nullptr;
  double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                    ": cannot parse '" + cell + "' as a number");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, int label_column, const LabelRule& rule,
                 bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_row(line);
    if (has_header && header.empty() && rows.empty()) {
      header = cells;
      width = cells.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(width));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) vals[c] = parse_cell(cells[c], line_no, c);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DataError("'" + path + "' contains no data rows");
  if (width < 2) throw DataError("'" + path + "' needs at least one feature column and a label column");

  int lc = label_column;
  if (lc < 0) lc += static_cast<int>(width);
  if (lc < 0 || lc >= static_cast<int>(width))
    throw DataError("label column " + std::to_string(label_column) + " out of range for " +
                    std::to_string(width) + " columns");

  const auto n = rows.size();
  const auto d = width - 1;
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.labels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t fc = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (static_cast<int>(c) == lc) {
        ds.labels(static_cast<Eigen::Index>(r)) = rule.apply(rows[r][c], r + 1);
      } else {
        ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(fc++)) = rows[r][c];
      }
    }
  }
  if (!header.empty()) {
    for (std::size_t c = 0; c < width; ++c)
      if (static_cast<int>(c) != lc) ds.column_names.push_back(header[c]);
  }
  ds.features = models::standardize(ds.features, &ds.constant_columns);
  return ds;
}

SyntheticData synth_data(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw DataError("synthetic data needs n >= 1 and d >= 1");
  SyntheticData out;
  RandomSource rng(mix_seed(seed, hash_name("synthetic")));
  out.true_weights.resize(d);
  for (int j = 0; j < d; ++j) out.true_weights(j) = rng.normal();
  out.true_bias = 0.0;
  out.dataset.features.resize(n, d);
  out.dataset.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    double logit = out.true_bias;
    for (int j = 0; j < d; ++j) {
      double x = rng.normal();
      out.dataset.features(i, j) = x;
      logit += x * out.true_weights(j);
    }
    double p = 1.0 / (1.0 + std::exp(-logit));
    out.dataset.labels(i) = rng.uniform01() < p ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace ppl
