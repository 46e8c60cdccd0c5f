#include <iostream>

#include "CLI11.hpp"
#include "dfa/experiments.hpp"

namespace {

struct Common {
  std::string config;
  std::size_t runs = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::string algorithm;
  bool parallel = false;
  std::string data_root;
};

dfa::ExperimentConfig resolve(const Common& c) {
  auto cfg = dfa::load_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  if (!c.algorithm.empty()) cfg.train.algorithm = dfa::parse_algorithm(c.algorithm);
  if (c.parallel) cfg.train.parallel_backward = true;
  return cfg;
}

dfa::TrainOptions options(const Common& c) {
  dfa::TrainOptions o;
  o.runs = c.runs;
  o.out_dir = c.out_dir;
  o.data_root = c.data_root.empty() ? dfa::default_data_root() : std::filesystem::path(c.data_root);
  o.log = &std::cerr;
  return o;
}

void add_common(CLI::App* cmd, Common& c, bool runs) {
  cmd->add_option("--config", c.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  if (runs) cmd->add_option("--runs", c.runs, "Independent runs with seeds seed, seed+1, ...");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out-dir", c.out_dir, "Output directory");
  cmd->add_option("--algorithm", c.algorithm, "Override the algorithm")->check(CLI::IsMember({"bp", "dfa"}));
  cmd->add_flag("--parallel-backward", c.parallel, "Layer-parallel DFA backward pass");
  cmd->add_option("--data-root", c.data_root, "Dataset directory (default: $DFA_DATA_ROOT)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct feedback alignment and backpropagation experiments"};
  app.set_version_flag("--version", DFA_VERSION);
  app.require_subcommand(1);

  Common train;
  auto* train_cmd = app.add_subcommand("train", "Train networks and record metrics");
  add_common(train_cmd, train, true);

  Common sweep;
  std::vector<std::size_t> sizes;
  auto* sweep_cmd = app.add_subcommand("bottleneck-sweep", "Train with gradient masks of several sizes");
  add_common(sweep_cmd, sweep, false);
  sweep_cmd->add_option("--sizes", sizes, "Neurons left trainable in the bottleneck layer")
      ->required()
      ->delimiter(',');

  std::string arch;
  std::optional<std::size_t> bytes;
  auto* mem_cmd = app.add_subcommand("memory-report", "Feedback matrix memory of an architecture");
  mem_cmd->add_option("--config,arch", arch, "Architecture or experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  mem_cmd->add_option("--bytes", bytes, "Bytes per element (default from the file, else 4)");

  dfa::FilterVizRequest viz;
  std::string viz_out = "filters", viz_ckpt;
  auto* viz_cmd = app.add_subcommand("filter-viz", "Images maximizing conv filter activations");
  viz_cmd->add_option("--checkpoint", viz_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  viz_cmd->add_option("--layer", viz.layer, "1-based conv layer")->required();
  viz_cmd->add_option("--filters", viz.filters, "Filter indices")->required()->delimiter(',');
  viz_cmd->add_option("--steps", viz.steps, "Gradient ascent steps");
  viz_cmd->add_option("--lr", viz.learning_rate, "Step size");
  viz_cmd->add_option("--seed", viz.seed, "Seed of the random starting image");
  viz_cmd->add_option("--out-dir", viz_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const auto results = dfa::cmd_train(resolve(train), options(train));
      for (const auto& r : results)
        std::cout << "seed " << r.seed << " test_acc " << r.test_accuracy << '\n';
    } else if (*sweep_cmd) {
      for (const auto& row : dfa::cmd_bottleneck_sweep(resolve(sweep), sizes, options(sweep)))
        std::cout << "size " << row.size << " test_acc " << row.result.test_accuracy << '\n';
    } else if (*mem_cmd) {
      auto cfg = dfa::load_config(arch);
      if (bytes) cfg.bytes_per_element = *bytes;
      std::cout << dfa::format_memory_report(cfg, dfa::architecture_memory(cfg));
    } else if (*viz_cmd) {
      viz.checkpoint = viz_ckpt;
      viz.out_dir = viz_out;
      const auto finals = dfa::cmd_filter_viz(viz);
      for (std::size_t i = 0; i < finals.size(); ++i)
        std::cout << "filter " << viz.filters[i] << " activation " << finals[i] << '\n';
    }
  } catch (const dfa::DataUnavailable& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
