#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfa/block.hpp"
#include "dfa/trainer.hpp"

namespace dfa {

/// Everything a run needs, parsed from a config file:
///
///   seed = 1
///   algorithm = dfa
///   learning_rate = 5e-4
///   activation = tanh        # default for hidden fc/conv blocks
///   [architecture]
///   input = 3x32x32
///   fc 800
///   conv 32 kernel=3 stride=1 pad=1 act=relu bn=on dropout=0.1
///   maxpool
///   fc 10                    # the last block is the classifier
///
/// `#` starts a comment. Defaults for activation, dropout and batchnorm apply
/// to every fc/conv block except the last, which is identity without dropout
/// or batchnorm unless its line says otherwise. input_dropout inserts a
/// leading dropout block.
struct ExperimentConfig {
  std::string dataset = "synthetic";  // mnist | cifar10 | cifar100 | synthetic
  std::size_t train_subset = 0;       // 0 = whole split
  std::size_t test_subset = 0;
  bool standardize = true;
  std::string precision = "float";    // float | double
  bool checkpoint = true;
  std::size_t bytes_per_element = 4;  // memory reports

  TrainConfig train;
  std::size_t bottleneck_layer = 2;   // layer masked by bottleneck-sweep

  Shape input_shape;
  std::vector<BlockConfig> blocks;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One architecture line with every option explicit, and its inverse.
std::string render_block(const BlockConfig& block);
BlockConfig parse_block_line(std::string_view line);

/// Canonical text form: every key explicit, blocks fully expanded. Parsing the
/// result gives back an equal configuration.
std::string render_config(const ExperimentConfig& config);

}  // namespace dfa
