#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfa/config.hpp"
#include "dfa/dataset.hpp"
#include "dfa/feedback.hpp"

namespace dfa {

/// Raised when a dataset's files are not present under the data root.
struct DataUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Data root from DFA_DATA_ROOT, or empty.
std::filesystem::path default_data_root();

struct DataSplits {
  LabeledDataset train;
  LabeledDataset test;
  std::optional<Standardization> standardization;
  std::vector<std::pair<std::string, std::uint64_t>> file_hashes;
};

/// Loads the configured dataset. Files are expected at
///   <root>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
///   <root>/cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin
///   <root>/cifar-100-binary/{train,test}.bin
/// "synthetic" needs no files: class prototypes plus Gaussian noise, shaped by
/// the architecture's input and output sizes, drawn from a fixed seed.
/// Subsets keep the first n samples; standardization is fitted on the
/// (subset) training split.
DataSplits load_data(const ExperimentConfig& config, const std::filesystem::path& root);

/// Canonical manifest text for one run of `config` with `seed`.
std::string render_manifest(const ExperimentConfig& config, const DataSplits& data,
                            std::uint64_t seed, std::size_t run);

struct TrainOptions {
  std::size_t runs = 1;
  std::filesystem::path out_dir = "runs";
  std::filesystem::path data_root;
  std::ostream* log = nullptr;
};

struct RunResult {
  std::uint64_t seed = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
  double test_loss = 0;
  /// Last alignment probe: mean and std of the cosines per layer (index i-1).
  std::vector<double> align_mean;
  std::vector<double> align_std;
};

struct AggregateRow {
  std::string metric;
  std::size_t layer = 0;
  double mean = 0;
  double std = 0;  // population standard deviation over runs
  std::size_t n = 0;
};

/// Mean and population std of `values`.
AggregateRow aggregate(std::string metric, std::size_t layer, const std::vector<double>& values);

/// Trains `runs` networks with seeds seed, seed+1, ... Each run writes
/// out_dir/run_<i>/{manifest.txt, metrics.csv, checkpoint.bin}; the manifest is
/// written before training starts. out_dir/aggregate.csv holds
/// metric,layer,mean,std,n over the runs' final values.
std::vector<RunResult> cmd_train(const ExperimentConfig& config, const TrainOptions& options);

struct SweepRow {
  std::size_t size = 0;    // neurons whose gradients stay live
  std::size_t masked = 0;
  RunResult result;
};

/// For each bottleneck size s, trains a fresh network whose bottleneck_layer
/// has (width - s) neurons masked; writes out_dir/sweep.csv with
/// size,masked,train_acc,test_acc,align_mean,align_std.
std::vector<SweepRow> cmd_bottleneck_sweep(const ExperimentConfig& config,
                                           const std::vector<std::size_t>& sizes,
                                           const TrainOptions& options);

/// Feedback memory of an architecture: layers 1..N-1 as l_i, the last
/// layer's units as e.
MemoryReport architecture_memory(const ExperimentConfig& config);
std::string format_memory_report(const ExperimentConfig& config, const MemoryReport& report);

struct FilterVizRequest {
  std::filesystem::path checkpoint;
  std::size_t layer = 1;
  std::vector<std::size_t> filters;
  std::size_t steps = 200;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "filters";
};

/// Writes filter_<k>.pgm/.ppm per filter, grid.pgm/.ppm, and objective.csv
/// (filter,step,value). Returns the final objective per filter.
std::vector<double> cmd_filter_viz(const FilterVizRequest& request);

}  // namespace dfa
