#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "alignmix/tensor.hpp"

namespace alignmix {

/// Labelled images held in memory, pixels in [0, 1].
struct Dataset {
  int channels = 1;
  int height = 16;
  int width = 16;
  int classes = 2;
  std::vector<float> pixels;           // count * channels * height * width
  std::vector<std::uint32_t> labels;   // count

  [[nodiscard]] std::size_t count() const { return labels.size(); }
  [[nodiscard]] std::size_t image_size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }

  template <typename T = float>
  [[nodiscard]] Tensor3<T> image(std::size_t i) const {
    Tensor3<T> out(channels, height, width);
    const float* src = pixels.data() + i * image_size();
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = static_cast<T>(src[k]);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

}  // namespace alignmix
