#include "alignmix/cli/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "alignmix/errors.hpp"

namespace alignmix::cli {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> encode_ppm_row(std::span<const Tensor3<float>> tiles) {
  if (tiles.empty()) throw dimension_error("ppm: no tiles");
  const auto& first = tiles.front();
  if (first.channels != 1 && first.channels != 3) throw dimension_error("ppm: tiles must have 1 or 3 channels");
  for (const auto& t : tiles)
    if (!t.same_shape(first)) throw dimension_error("ppm: tiles differ in shape");

  const int tw = first.width, th = first.height;
  const int width = tw * static_cast<int>(tiles.size());
  const std::string header = fmt::format("P6\n{} {}\n255\n", width, th);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(width) * th * 3);
  for (int y = 0; y < th; ++y) {
    for (const auto& t : tiles) {
      for (int x = 0; x < tw; ++x) {
        for (int c = 0; c < 3; ++c) {
          const int src = t.channels == 1 ? 0 : c;
          out.push_back(to_byte(t.at(src, y, x)));
        }
      }
    }
  }
  return out;
}

}  // namespace alignmix::cli
