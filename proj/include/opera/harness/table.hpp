#pragma once

#include <string>
#include <vector>

namespace opera {

// One aggregate line of an experiment: a (policy, n, method) cell. Base
// estimators appear as methods under their own ids so tables carry both.
struct ResultRow {
  std::string env;
  std::string policy;
  int n = 0;
  std::string method;
  double mse = 0.0;
  double rmse = 0.0;
  double stderr_ = 0.0;  // stderr of the MSE across trials
  int trials = 0;        // trials aggregated (excludes hard-failed ones)
  double truth = 0.0;
  double truth_stderr = 0.0;  // 0 when the truth is exact (DP)
  int failures = 0;           // hard estimator failures among the trials
};

enum class TableFormat { csv, json, markdown };

TableFormat parse_table_format(const std::string& name);

// Renders with a stable column order and %.12g numbers, so equal results are
// byte-identical files.
std::string render_table(const std::vector<ResultRow>& rows, TableFormat format);

void write_table(const std::vector<ResultRow>& rows, TableFormat format,
                 const std::string& path);

}  // namespace opera
