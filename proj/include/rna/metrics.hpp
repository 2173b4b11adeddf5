#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rna {

/// One row of the per-epoch metrics table. `lambda_used` is NaN when the
/// extrapolation fell back to the last iterate.
struct MetricsRow {
  std::int64_t epoch = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double objective_rna = 0.0;
  double grad_norm_rna = 0.0;
  double lambda_used = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,objective,grad_norm,objective_rna,grad_norm_rna,lambda_used";

/// Renders a double with 17 significant digits ("nan"/"inf" for non-finite).
std::string format_scalar(double value);

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace rna
