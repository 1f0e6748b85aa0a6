#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ppl {

// Dense design matrix plus binary labels, feature columns already
// standardized (restandardizing at model construction is then a no-op).
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd labels;    // n, each entry 0 or 1
  std::vector<std::string> column_names;  // empty when the file has no header
  std::vector<int> constant_columns;      // left unscaled during standardization
};

// Parse a rule like "eq:2" or "gt:5" into a predicate applied to the raw
// label column. An empty rule requires the column to already be 0/1.
struct LabelRule {
  enum class Kind { identity, eq, gt, ge, lt, le } kind = Kind::identity;
  double threshold = 0.0;

  static LabelRule parse(const std::string& text);
  double apply(double raw, std::size_t row) const;
};

// Reads a comma-separated file. label_column is a zero-based index; negative
// values count from the end (-1 is the last column). Feature columns are
// standardized to zero mean and unit variance; constant columns are skipped
// and listed in the result. Throws DataError with the offending row and
// column on any parse failure.
Dataset load_csv(const std::string& path, int label_column, const LabelRule& rule,
                 bool has_header);

// Logistic-regression test bed: features are standard normal, labels are
// drawn from Bernoulli(sigmoid(X w + b)) with w ~ N(0,1) entries and b = 0.
// The generating weights are returned so recovery can be checked.
struct SyntheticData {
  Dataset dataset;
  Eigen::VectorXd true_weights;
  double true_bias = 0.0;
};

SyntheticData synth_data(int n, int d, std::uint64_t seed);

}  // namespace ppl
