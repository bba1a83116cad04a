#pragma once

// Binary PPM (P6) output.
//
//   "P6\n<width> <height>\n255\n" followed by width*height RGB byte triples, row-major.
// Tiles are laid out left to right with no separators; a one-channel tile is written
// as gray (R = G = B). Each sample is round(clamp(v, 0, 1) * 255).

#include <cstdint>
#include <span>
#include <vector>

#include "alignmix/tensor.hpp"

namespace alignmix::cli {

std::vector<std::uint8_t> encode_ppm_row(std::span<const Tensor3<float>> tiles);

std::uint8_t to_byte(double v);

}  // namespace alignmix::cli
