#pragma once

// AMIX dataset files and the built-in data generators.
//
// AMIX layout (all integers u32 little-endian):
//   "AMIX" | version=1 | count | c | h | w | k | count*c*h*w f32 pixels | count labels
// Pixels are channel-major per image, in [0,1]; labels are < k.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "alignmix/dataset.hpp"

namespace alignmix::cli {

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

struct SynthSpec {
  int classes = 4;
  int image_size = 16;
  int channels = 1;
  int train_count = 2000;
  int test_count = 400;
  double noise = 0.08;

  void validate() const;
};

struct SynthPair {
  Dataset train;
  Dataset test;
};

/// Parametric shapes (one primitive per class) with random pose, intensity and
/// pixel noise. Train and test draw from separate seed streams.
SynthPair generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Renders `count` images of the given class set with an explicit stream id.
Dataset render_shapes(const SynthSpec& spec, int count, std::uint64_t seed, std::uint64_t stream);

enum class NoiseKind { uniform, gaussian };

/// Per-pixel U(0,1), or N(0.5, 0.5) clipped to [0,1]. Labels are all zero.
Dataset generate_noise(NoiseKind kind, int count, int channels, int height, int width, int classes,
                       std::uint64_t seed);

}  // namespace alignmix::cli
