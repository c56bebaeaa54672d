#include "opera/harness/table.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "opera/errors.hpp"

namespace opera {

namespace {

const char* const kColumns[] = {"env",    "policy", "n",     "method", "mse",          "rmse",
                                "stderr", "trials", "truth", "truth_stderr", "failures"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::vector<std::string> row_cells(const ResultRow& r) {
  return {r.env,         r.policy,           std::to_string(r.n),
          r.method,      fmt(r.mse),         fmt(r.rmse),
          fmt(r.stderr_), std::to_string(r.trials), fmt(r.truth),
          fmt(r.truth_stderr), std::to_string(r.failures)};
}

}  // namespace

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::csv;
  if (name == "json") return TableFormat::json;
  if (name == "markdown") return TableFormat::markdown;
  throw ConfigError("unknown table format '" + name + "'");
}

std::string render_table(const std::vector<ResultRow>& rows, TableFormat format) {
  if (rows.empty()) throw ConfigError("no result rows to render");
  std::ostringstream out;

  switch (format) {
    case TableFormat::csv: {
      for (std::size_t c = 0; c < std::size(kColumns); ++c)
        out << (c ? "," : "") << kColumns[c];
      out << '\n';
      for (const ResultRow& r : rows) {
        const auto cells = row_cells(r);
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
        out << '\n';
      }
      break;
    }
    case TableFormat::json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const ResultRow& r : rows)
        arr.push_back({{"env", r.env},
                       {"policy", r.policy},
                       {"n", r.n},
                       {"method", r.method},
                       {"mse", r.mse},
                       {"rmse", r.rmse},
                       {"stderr", r.stderr_},
                       {"trials", r.trials},
                       {"truth", r.truth},
                       {"truth_stderr", r.truth_stderr},
                       {"failures", r.failures}});
      out << arr.dump(1) << '\n';
      break;
    }
    case TableFormat::markdown: {
      out << '|';
      for (const char* const c : kColumns) out << ' ' << c << " |";
      out << "\n|";
      for (std::size_t c = 0; c < std::size(kColumns); ++c) out << " --- |";
      out << '\n';
      for (const ResultRow& r : rows) {
        out << '|';
        for (const std::string& cell : row_cells(r)) out << ' ' << cell << " |";
        out << '\n';
      }
      break;
    }
  }
  return out.str();
}

void write_table(const std::vector<ResultRow>& rows, TableFormat format,
                 const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << render_table(rows, format);
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace opera
