#include "dfa/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dfa/checkpoint.hpp"
#include "dfa/error.hpp"
#include "dfa/filter_viz.hpp"
#include "dfa/format.hpp"
#include "dfa/metrics.hpp"
#include "dfa/ops.hpp"
#include "dfa/trainer.hpp"

namespace fs = std::filesystem;

namespace dfa {

namespace {

constexpr std::uint64_t kSyntheticSeed = 0x5e7d'a7a5'ee0d'0001ULL;

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<fs::path> require(const fs::path& root, std::initializer_list<const char*> names,
                              const std::string& what) {
  std::vector<fs::path> out;
  for (const char* n : names) {
    out.push_back(root / n);
    if (!fs::exists(out.back()))
      throw DataUnavailable(what + " not found: " + out.back().string() +
                            " (set DFA_DATA_ROOT or --data-root)");
  }
  return out;
}

LabeledDataset synthetic_split(const Shape& input, std::size_t classes, std::size_t n,
                               const Tensor<float>& prototypes, Prng rng) {
  LabeledDataset d;
  Shape shape{n};
  shape.insert(shape.end(), input.begin(), input.end());
  d.images = Tensor<float>(shape);
  d.labels.resize(n);
  d.classes = classes;
  const std::size_t len = shape_size(input);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint16_t>(rng.below(classes));
    d.labels[i] = c;
    for (std::size_t k = 0; k < len; ++k)
      d.images[i * len + k] = static_cast<float>(prototypes[c * len + k] + 2.0 * rng.normal());
  }
  return d;
}

template <typename T>
std::vector<RunResult> train_runs(const ExperimentConfig& config, const DataSplits& data,
                                  const TrainOptions& options) {
  std::vector<RunResult> results;
  fs::create_directories(options.out_dir);
  for (std::size_t run = 0; run < options.runs; ++run) {
    const std::uint64_t seed = config.train.seed + run;
    const fs::path dir = options.out_dir / ("run_" + std::to_string(run));
    fs::create_directories(dir);
    const std::string manifest = render_manifest(config, data, seed, run);
    {
      std::ofstream out(dir / "manifest.txt");
      out << manifest;
      if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    }
    fs::remove(dir / "metrics.csv");

    TrainConfig tc = config.train;
    tc.seed = seed;
    Trainer<T> trainer(config.input_shape, config.blocks, tc);
    MetricsWriter metrics(dir / "metrics.csv");
    EpochMetrics last;
    std::vector<AlignmentRecord> last_alignment;
    for (std::size_t e = 0; e < tc.epochs; ++e) {
      const auto start = std::chrono::steady_clock::now();
      last = trainer.train_epoch(data.train, data.test);
      if (!last.alignment.empty()) last_alignment = last.alignment;
      metrics.write(epoch_rows(last));
      metrics.flush();
      if (options.log) {
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
        *options.log << "run " << run << " epoch " << last.epoch << " loss "
                     << format_number(last.train_loss) << " train_acc "
                     << format_number(last.train_accuracy) << " test_acc "
                     << format_number(last.test_accuracy);
        for (const auto& a : last.alignment)
          *options.log << " cos" << a.layer << ' ' << std::setprecision(3) << a.mean_cos;
        *options.log << " (" << std::setprecision(3) << took.count() << " s)" << std::endl;
      }
    }
    if (config.checkpoint)
      save_checkpoint(dir / "checkpoint.bin", trainer.network(), "manifest " + hex(fnv1a(manifest.data(), manifest.size())));

    RunResult r;
    r.seed = seed;
    r.train_accuracy = last.train_accuracy;
    r.test_accuracy = last.test_accuracy;
    r.test_loss = last.test_loss;
    r.align_mean.assign(trainer.network().layer_count(), std::nan(""));
    r.align_std.assign(trainer.network().layer_count(), std::nan(""));
    for (const auto& a : last_alignment) {
      r.align_mean[a.layer - 1] = a.mean_cos;
      r.align_std[a.layer - 1] = a.std_cos;
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<RunResult> dispatch_runs(const ExperimentConfig& config, const DataSplits& data,
                                     const TrainOptions& options) {
  if (config.precision == "double") return train_runs<double>(config, data, options);
  return train_runs<float>(config, data, options);
}

void write_aggregate(const fs::path& path, const std::vector<RunResult>& runs) {
  std::vector<AggregateRow> rows;
  auto collect = [&](const std::string& name, auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    rows.push_back(aggregate(name, 0, v));
  };
  collect("train_acc", [](const RunResult& r) { return r.train_accuracy; });
  collect("test_acc", [](const RunResult& r) { return r.test_accuracy; });
  collect("test_loss", [](const RunResult& r) { return r.test_loss; });
  const std::size_t layers = runs.empty() ? 0 : runs[0].align_mean.size();
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> v;
    for (const auto& r : runs)
      if (!std::isnan(r.align_mean[l])) v.push_back(r.align_mean[l]);
    if (!v.empty()) rows.push_back(aggregate("align_cos", l + 1, v));
  }
  std::ofstream out(path);
  out << "metric,layer,mean,std,n\n";
  for (const auto& r : rows)
    out << r.metric << ',' << r.layer << ',' << format_number(r.mean) << ','
        << format_number(r.std) << ',' << r.n << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

fs::path default_data_root() {
  const char* env = std::getenv("DFA_DATA_ROOT");
  return env ? fs::path(env) : fs::path();
}

DataSplits load_data(const ExperimentConfig& config, const fs::path& root) {
  DataSplits d;
  auto hash_all = [&](const std::vector<fs::path>& files) {
    for (const auto& f : files) d.file_hashes.emplace_back(f.filename().string(), file_hash(f));
  };
  if (config.dataset == "mnist") {
    const auto f = require(root / "mnist",
                           {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                            "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"},
                           "MNIST");
    d.train = load_mnist_idx(f[0], f[1]);
    d.test = load_mnist_idx(f[2], f[3]);
    hash_all(f);
  } else if (config.dataset == "cifar10") {
    const auto f = require(root / "cifar-10-batches-bin",
                           {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                            "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"},
                           "CIFAR-10");
    d.train = load_cifar_binary(std::span(f.data(), 5), 10);
    d.test = load_cifar_binary(std::span(f.data() + 5, 1), 10);
    hash_all(f);
  } else if (config.dataset == "cifar100") {
    const auto f = require(root / "cifar-100-binary", {"train.bin", "test.bin"}, "CIFAR-100");
    d.train = load_cifar_binary(std::span(f.data(), 1), 100);
    d.test = load_cifar_binary(std::span(f.data() + 1, 1), 100);
    hash_all(f);
  } else {
    if (config.blocks.empty()) throw ParameterError("synthetic data needs an architecture");
    const std::size_t classes = config.blocks.back().units;
    Prng rng(kSyntheticSeed);
    const Tensor<float> prototypes = gaussian_fill<float>(rng, {classes, shape_size(config.input_shape)}, 0.0, 1.0);
    d.train = synthetic_split(config.input_shape, classes,
                              config.train_subset ? config.train_subset : 2000, prototypes, rng.fork(1));
    d.test = synthetic_split(config.input_shape, classes,
                             config.test_subset ? config.test_subset : 500, prototypes, rng.fork(2));
  }
  d.train.split = "train";
  d.test.split = "test";
  d.train = d.train.head(config.train_subset);
  d.test = d.test.head(config.test_subset);
  if (d.train.sample_shape() != config.input_shape)
    throw ParameterError("config input " + to_string(config.input_shape) + " does not match " +
                         config.dataset + " samples " + to_string(d.train.sample_shape()));
  if (d.train.classes != config.blocks.back().units)
    throw ParameterError("classifier has " + std::to_string(config.blocks.back().units) +
                         " outputs but " + config.dataset + " has " +
                         std::to_string(d.train.classes) + " classes");
  if (config.standardize) {
    d.standardization = fit_standardization(d.train);
    apply_standardization(d.train, *d.standardization);
    apply_standardization(d.test, *d.standardization);
  }
  return d;
}

std::string render_manifest(const ExperimentConfig& config, const DataSplits& data,
                            std::uint64_t seed, std::size_t run) {
  ExperimentConfig c = config;
  c.train.seed = seed;
  std::ostringstream os;
  os << "version " << DFA_VERSION << '\n'
     << "run " << run << '\n'
     << "train_samples " << data.train.size() << '\n'
     << "test_samples " << data.test.size() << '\n';
  for (const auto& [name, h] : data.file_hashes) os << "file " << name << ' ' << hex(h) << '\n';
  if (data.standardization) {
    os << "standardization_mean";
    for (double m : data.standardization->mean) os << ' ' << format_number(m);
    os << "\nstandardization_std";
    for (double s : data.standardization->stddev) os << ' ' << format_number(s);
    os << '\n';
  }
  os << "[config]\n" << render_config(c);
  return os.str();
}

AggregateRow aggregate(std::string metric, std::size_t layer, const std::vector<double>& values) {
  AggregateRow r{std::move(metric), layer, 0, 0, values.size()};
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

std::vector<RunResult> cmd_train(const ExperimentConfig& config, const TrainOptions& options) {
  if (options.runs == 0) throw ParameterError("train: --runs must be >= 1");
  const DataSplits data = load_data(config, options.data_root);
  const auto results = dispatch_runs(config, data, options);
  write_aggregate(options.out_dir / "aggregate.csv", results);
  return results;
}

std::vector<SweepRow> cmd_bottleneck_sweep(const ExperimentConfig& config,
                                           const std::vector<std::size_t>& sizes,
                                           const TrainOptions& options) {
  const std::size_t layer = config.bottleneck_layer;
  std::size_t width = 0, seen = 0;
  for (const auto& b : config.blocks)
    if (b.has_parameters() && ++seen == layer) width = b.units;
  if (width == 0) throw ParameterError("sweep: bottleneck_layer " + std::to_string(layer) + " does not exist");
  for (std::size_t s : sizes)
    if (s > width)
      throw ParameterError("sweep: size " + std::to_string(s) + " exceeds layer width " +
                           std::to_string(width));
  const DataSplits data = load_data(config, options.data_root);
  std::vector<SweepRow> rows;
  fs::create_directories(options.out_dir);
  for (std::size_t s : sizes) {
    ExperimentConfig c = config;
    c.train.mask = MaskConfig{layer, width - s};
    TrainOptions o = options;
    o.runs = 1;
    o.out_dir = options.out_dir / ("size_" + std::to_string(s));
    SweepRow row{s, width - s, dispatch_runs(c, data, o).front()};
    rows.push_back(std::move(row));
  }
  std::ofstream out(options.out_dir / "sweep.csv");
  out << "size,masked,train_acc,test_acc,align_mean,align_std\n";
  for (const auto& r : rows)
    out << r.size << ',' << r.masked << ',' << format_number(r.result.train_accuracy) << ','
        << format_number(r.result.test_accuracy) << ','
        << format_number(r.result.align_mean.at(layer - 1)) << ','
        << format_number(r.result.align_std.at(layer - 1)) << '\n';
  if (!out) throw std::runtime_error("cannot write sweep.csv");
  return rows;
}

MemoryReport architecture_memory(const ExperimentConfig& config) {
  if (config.blocks.empty()) throw ParameterError("memory-report: architecture lists no blocks");
  std::vector<std::size_t> sizes;
  Shape shape = config.input_shape;
  std::size_t last_units = 0;
  for (const auto& b : config.blocks) {
    shape = b.output_shape(shape);
    if (b.has_parameters()) {
      sizes.push_back(shape_size(shape));
      last_units = shape_size(shape);
    }
  }
  if (sizes.empty()) throw ParameterError("memory-report: architecture has no layers");
  sizes.pop_back();
  if (sizes.empty()) {
    // Only the output layer: it uses e directly and needs no feedback matrix.
    MemoryReport r;
    r.error_size = last_units;
    r.bytes_per_element = config.bytes_per_element;
    return r;
  }
  return memory_report(sizes, last_units, config.bytes_per_element);
}

std::string format_memory_report(const ExperimentConfig& config, const MemoryReport& r) {
  std::ostringstream os;
  auto gb = [](std::uint64_t b) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << static_cast<double>(b) / 1e9;
    return s.str();
  };
  os << "error_size " << r.error_size << '\n'
     << "bytes_per_element " << r.bytes_per_element << '\n'
     << "feedback_layers " << r.layer_sizes.size() << '\n';
  std::size_t layer = 0;
  for (const auto& b : config.blocks) {
    if (!b.has_parameters()) continue;
    if (layer == r.layer_sizes.size()) break;
    os << "layer " << layer + 1 << ' ' << to_string(b.kind) << ' ' << b.units << " l "
       << r.layer_sizes[layer] << " bytes " << r.layer_bytes[layer] << '\n';
    ++layer;
  }
  os << "naive_bytes " << r.naive_bytes << '\n'
     << "unified_bytes " << r.unified_bytes << '\n'
     << "naive_gb " << gb(r.naive_bytes) << '\n'
     << "unified_gb " << gb(r.unified_bytes) << '\n';
  return os.str();
}

std::vector<double> cmd_filter_viz(const FilterVizRequest& req) {
  Network<float> net = load_checkpoint<float>(req.checkpoint);
  fs::create_directories(req.out_dir);
  std::vector<Tensor<float>> images;
  std::vector<double> finals;
  std::ofstream curve(req.out_dir / "objective.csv");
  curve << "filter,step,value\n";
  const bool rgb = net.input_shape().size() == 3 && net.input_shape()[0] == 3;
  for (std::size_t f : req.filters) {
    FilterVizOptions opt{req.steps, req.learning_rate, req.seed + f};
    auto res = maximize_filter(net, req.layer, f, opt);
    for (std::size_t s = 0; s < res.objective.size(); ++s)
      curve << f << ',' << s << ',' << format_number(res.objective[s]) << '\n';
    write_pnm(req.out_dir / ("filter_" + std::to_string(f) + (rgb ? ".ppm" : ".pgm")), res.image);
    finals.push_back(res.objective.back());
    images.push_back(std::move(res.image));
  }
  if (!images.empty())
    write_grid(req.out_dir / (rgb ? "grid.ppm" : "grid.pgm"), images,
               static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(images.size())))));
  return finals;
}

}  // namespace dfa
