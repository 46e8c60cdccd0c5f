#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dfa/alignment.hpp"
#include "dfa/trainer.hpp"

namespace dfa {

/// One line of metrics.csv:
///   step,epoch,layer,metric,value,std,n
/// layer is 0 for whole-network metrics; std is empty when it does not apply.
/// Numbers are written in shortest round-trip form.
struct MetricRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t layer = 0;
  std::string metric;
  double value = 0;
  std::optional<double> std;
  std::size_t n = 0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* kMetricsHeader = "step,epoch,layer,metric,value,std,n";

/// align_cos (mean, std of the cosines) and align_deg (arccos of the mean,
/// std of the per-sample angles) for one record.
std::vector<MetricRow> alignment_rows(const AlignmentRecord& record);

/// train_loss, train_acc, test_loss, test_acc, lr and the alignment rows.
std::vector<MetricRow> epoch_rows(const EpochMetrics& metrics);

std::string format_row(const MetricRow& row);

/// Append-only CSV; the header is written when the file is created.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);

  void write(const MetricRow& row);
  void write(const std::vector<MetricRow>& rows);
  void flush();

 private:
  std::ofstream out_;
};

std::vector<MetricRow> read_metrics(const std::filesystem::path& path);

}  // namespace dfa
