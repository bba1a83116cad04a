#include "alignmix/cli/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <random>

#include "alignmix/errors.hpp"
#include "alignmix/io/binary.hpp"

namespace alignmix::cli {

namespace {

constexpr std::string_view kMagic = "AMIX";
constexpr std::size_t kHeaderBytes = 4 + 6 * 4;

void check_dataset(const Dataset& d) {
  if (d.channels < 1 || d.height < 1 || d.width < 1 || d.classes < 1)
    throw format_error("dataset: dimensions must be positive");
  if (d.pixels.size() != d.count() * d.image_size()) throw format_error("dataset: pixel count mismatch");
  for (float v : d.pixels)
    if (!(v >= 0.0f && v <= 1.0f)) throw format_error("dataset: pixel outside [0,1]");
  for (auto l : d.labels)
    if (l >= static_cast<std::uint32_t>(d.classes)) throw format_error(fmt::format("dataset: label {} >= k", l));
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  check_dataset(data);
  io::ByteWriter w;
  w.raw(kMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(data.count()));
  w.u32(static_cast<std::uint32_t>(data.channels));
  w.u32(static_cast<std::uint32_t>(data.height));
  w.u32(static_cast<std::uint32_t>(data.width));
  w.u32(static_cast<std::uint32_t>(data.classes));
  for (float v : data.pixels) w.f32(v);
  for (auto l : data.labels) w.u32(l);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  if (r.raw(4) != kMagic) throw format_error("dataset: bad magic");
  if (const auto v = r.u32(); v != kDatasetVersion)
    throw format_error(fmt::format("dataset: unsupported version {}", v));
  const std::uint64_t count = r.u32();
  Dataset d;
  const std::uint64_t c = r.u32(), h = r.u32(), w = r.u32(), k = r.u32();
  if (c == 0 || h == 0 || w == 0 || k == 0 || c > 64 || h > 4096 || w > 4096)
    throw format_error("dataset: implausible header dimensions");
  const std::uint64_t expected = kHeaderBytes + count * c * h * w * 4 + count * 4;
  if (bytes.size() != expected)
    throw format_error(fmt::format("dataset: payload is {} bytes, header implies {}", bytes.size(), expected));
  d.channels = static_cast<int>(c);
  d.height = static_cast<int>(h);
  d.width = static_cast<int>(w);
  d.classes = static_cast<int>(k);
  d.pixels.resize(count * c * h * w);
  for (auto& v : d.pixels) v = r.f32();
  d.labels.resize(count);
  for (auto& l : d.labels) l = r.u32();
  check_dataset(d);
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  io::write_file_atomic(path, encode_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_dataset(bytes);
  } catch (const format_error& e) {
    throw format_error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void SynthSpec::validate() const {
  if (classes < 2 || classes > 16) throw parameter_error("gen-synth: classes must lie in 2..16");
  if (image_size != 16 && image_size != 32) throw parameter_error("gen-synth: image size must be 16 or 32");
  if (channels != 1 && channels != 3) throw parameter_error("gen-synth: channels must be 1 or 3");
  if (train_count < 0 || test_count < 0) throw parameter_error("gen-synth: counts must be nonnegative");
  if (!(noise >= 0.0 && noise <= 1.0)) throw parameter_error("gen-synth: noise must lie in [0, 1]");
}

namespace {

// Shape membership in local coordinates (u, v) in [-1, 1]^2.
bool inside(int shape, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double r2 = u * u + v * v;
  switch (shape) {
    case 0: return r2 <= 0.8;                                          // disk
    case 1: return au <= 0.75 && av <= 0.75;                           // square
    case 2: return v >= -0.7 && v <= 0.8 && au <= 0.55 * (0.8 - v);    // triangle
    case 3: return (au <= 0.25 && av <= 0.95) || (av <= 0.25 && au <= 0.95);  // plus
    case 4: return r2 <= 0.9 && r2 >= 0.35;                            // ring
    case 5: return au <= 0.95 && av <= 0.3;                            // horizontal bar
    case 6: return au <= 0.3 && av <= 0.95;                            // vertical bar
    case 7: return au + av <= 1.0;                                     // diamond
    case 8: return (std::abs(u - v) <= 0.35 || std::abs(u + v) <= 0.35) && r2 <= 1.0;  // X
    case 9: return au <= 0.85 && av <= 0.85 && (au >= 0.5 || av >= 0.5);  // hollow square
    case 10: return (u >= -0.8 && u <= -0.3 && av <= 0.85) || (v >= 0.35 && v <= 0.85 && au <= 0.8);  // L
    case 11: return (v >= -0.85 && v <= -0.4 && au <= 0.85) || (au <= 0.25 && av <= 0.85);            // T
    case 12: return r2 <= 0.85 && v >= 0.0;                            // half disk
    case 13: return (u + 0.45) * (u + 0.45) + v * v <= 0.14 || (u - 0.45) * (u - 0.45) + v * v <= 0.14;  // two dots
    case 14: return av <= 0.9 && au <= 0.9 && static_cast<int>(std::floor((v + 1.0) * 2.5)) % 2 == 0;      // stripes
    case 15: return r2 <= 0.9 && !(au <= 0.3 && av <= 0.3);           // disk with square hole
    default: return false;
  }
}

}  // namespace

Dataset render_shapes(const SynthSpec& spec, int count, std::uint64_t seed, std::uint64_t stream) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset d;
  d.channels = spec.channels;
  d.height = spec.image_size;
  d.width = spec.image_size;
  d.classes = spec.classes;
  d.pixels.resize(static_cast<std::size_t>(count) * d.image_size());
  d.labels.resize(static_cast<std::size_t>(count));

  const int n = spec.image_size;
  const double half = 0.5 * n;
  constexpr int kSuper = 3;
  for (int i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.classes));
    const double scale = half * (0.55 + 0.3 * unit(rng));
    const double angle = (unit(rng) - 0.5) * 0.6;
    const double cx = half + (unit(rng) - 0.5) * 0.25 * n;
    const double cy = half + (unit(rng) - 0.5) * 0.25 * n;
    const double bg = 0.25 * unit(rng);
    std::array<double, 3> fg{};
    const double base = 0.6 + 0.4 * unit(rng);
    for (auto& f : fg) f = spec.channels == 1 ? base : std::clamp(base * (0.6 + 0.4 * unit(rng)), 0.0, 1.0);
    const double ca = std::cos(angle), sa = std::sin(angle);

    float* img = d.pixels.data() + static_cast<std::size_t>(i) * d.image_size();
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const double px = x + (sx + 0.5) / kSuper - cx;
            const double py = y + (sy + 0.5) / kSuper - cy;
            const double u = (ca * px + sa * py) / scale;
            const double v = (-sa * px + ca * py) / scale;
            hits += inside(label, u, v) ? 1 : 0;
          }
        }
        const double cover = static_cast<double>(hits) / (kSuper * kSuper);
        for (int c = 0; c < spec.channels; ++c) {
          const double value = bg + cover * (fg[static_cast<std::size_t>(c)] - bg) + spec.noise * gauss(rng);
          img[(static_cast<std::size_t>(c) * n + y) * n + x] = static_cast<float>(std::clamp(value, 0.0, 1.0));
        }
      }
    }
    d.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(label);
  }
  return d;
}

SynthPair generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  return {render_shapes(spec, spec.train_count, seed, 1), render_shapes(spec, spec.test_count, seed, 2)};
}

Dataset generate_noise(NoiseKind kind, int count, int channels, int height, int width, int classes,
                       std::uint64_t seed) {
  if (count < 0 || channels < 1 || height < 1 || width < 1 || classes < 1)
    throw parameter_error("noise: invalid shape");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e6f6973u,
                    static_cast<std::uint32_t>(kind)};
  std::mt19937_64 rng(seq);
  Dataset d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.classes = classes;
  d.pixels.resize(static_cast<std::size_t>(count) * d.image_size());
  d.labels.assign(static_cast<std::size_t>(count), 0);
  if (kind == NoiseKind::uniform) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& v : d.pixels) v = static_cast<float>(dist(rng));
  } else {
    std::normal_distribution<double> dist(0.5, 0.5);
    for (auto& v : d.pixels) v = static_cast<float>(std::clamp(dist(rng), 0.0, 1.0));
  }
  return d;
}

}  // namespace alignmix::cli
