#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfa/network.hpp"

namespace dfa {

/// Checkpoint layout. A text header, one item per line:
///
///   dfa-checkpoint 1
///   precision float|double
///   note <free text, e.g. the manifest hash>
///   input CxHxW
///   block <architecture line>            one per block, in order
///   running <layer>                      batchnorm running stats are valid
///   tensor <name> <d0>x<d1>...           one per tensor, in payload order
///   end
///
/// followed by the raw tensors back to back as little-endian IEEE-754 values
/// of the stated precision. Tensor names are layer<i>.weight, .bias, .gamma,
/// .beta, .running_mean and .running_var.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net,
                     const std::string& note = {});

/// Rebuilds the network described by a checkpoint and restores its tensors,
/// converting precision when needed.
template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace dfa
