#include "rna/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rna/error.hpp"

namespace rna {

std::string format_scalar(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.epoch << ',' << format_scalar(r.objective) << ',' << format_scalar(r.grad_norm) << ','
        << format_scalar(r.objective_rna) << ',' << format_scalar(r.grad_norm_rna) << ','
        << format_scalar(r.lambda_used) << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw Error(ErrorKind::FormatError, path.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string cell;
    double values[6];
    int n = 0;
    while (n < 6 && std::getline(fields, cell, ',')) {
      char* end = nullptr;
      values[n] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw Error(ErrorKind::FormatError, path.string() + ": bad field '" + cell + "'");
      }
      ++n;
    }
    if (n != 6) throw Error(ErrorKind::FormatError, path.string() + ": short row '" + line + "'");
    rows.push_back({static_cast<std::int64_t>(values[0]), values[1], values[2], values[3], values[4],
                    values[5]});
  }
  return rows;
}

}  // namespace rna
