#pragma once

// AMCK checkpoint layout (all integers u32 little-endian, floats IEEE-754 binary32 LE):
//
//   "AMCK" | version
//   tensor count | tensors...            parameter block
//   tensor count | tensors...            optimizer block
//
//   tensor := name length | UTF-8 name | rank | dims[rank] | values[prod(dims)]
//
// The parameter block starts with "meta.architecture" (rank 1, six values: in_channels,
// image_size, channels, feature_size, classes, decoder flag) followed by the model
// parameters in registration order. The optimizer block holds "velocity/<param name>"
// for every parameter.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "alignmix/model/network.hpp"
#include "alignmix/model/optimizer.hpp"

namespace alignmix::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelBundle<float> model;
  SgdState<float> optimizer;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle<float>& model, const SgdState<float>& optimizer);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& model,
                     const SgdState<float>& optimizer);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace alignmix::model
