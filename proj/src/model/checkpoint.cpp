#include "alignmix/model/checkpoint.hpp"

#include <string>

#include "alignmix/io/binary.hpp"

namespace alignmix::model {

namespace {

constexpr std::string_view kMagic = "AMCK";
constexpr std::string_view kArchName = "meta.architecture";
constexpr std::string_view kVelocityPrefix = "velocity/";

void write_tensor(io::ByteWriter& w, std::string_view name, const std::vector<int>& dims,
                  std::span<const float> values) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.raw(name);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) w.u32(static_cast<std::uint32_t>(d));
  for (float v : values) w.f32(v);
}

struct RawTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

RawTensor read_tensor(io::ByteReader& r) {
  RawTensor t;
  const std::uint32_t len = r.u32();
  if (len > 4096) throw format_error("checkpoint: implausible tensor name length");
  t.name = r.raw(len);
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw format_error("checkpoint: implausible tensor rank for " + t.name);
  std::size_t n = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    const std::uint32_t d = r.u32();
    t.dims.push_back(static_cast<int>(d));
    n *= d;
  }
  if (n * 4 > r.remaining()) throw format_error("checkpoint: tensor " + t.name + " exceeds file size");
  t.values.resize(n);
  for (float& v : t.values) v = r.f32();
  return t;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle<float>& model, const SgdState<float>& optimizer) {
  const auto& params = model.params();
  if (optimizer.velocity.size() != params.size()) throw dimension_error("checkpoint: optimizer state does not match model");
  io::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);

  const Architecture& a = model.arch();
  const std::vector<float> arch{static_cast<float>(a.in_channels), static_cast<float>(a.image_size),
                                static_cast<float>(a.channels),    static_cast<float>(a.feature_size),
                                static_cast<float>(a.classes),     a.decoder ? 1.0f : 0.0f};
  w.u32(static_cast<std::uint32_t>(params.size() + 1));
  write_tensor(w, kArchName, {6}, arch);
  for (const auto& p : params) write_tensor(w, p.name, p.dims, p.value);

  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[static_cast<int>(i)];
    write_tensor(w, std::string(kVelocityPrefix) + p.name, p.dims, optimizer.velocity[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.raw(4) != kMagic) throw format_error("checkpoint: bad magic (expected AMCK)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw format_error("checkpoint: unsupported version " + std::to_string(version));

  const std::uint32_t count = r.u32();
  if (count < 1) throw format_error("checkpoint: empty parameter block");
  const RawTensor arch_t = read_tensor(r);
  if (arch_t.name != kArchName || arch_t.values.size() != 6)
    throw format_error("checkpoint: missing architecture record");
  Architecture arch;
  arch.in_channels = static_cast<int>(arch_t.values[0]);
  arch.image_size = static_cast<int>(arch_t.values[1]);
  arch.channels = static_cast<int>(arch_t.values[2]);
  arch.feature_size = static_cast<int>(arch_t.values[3]);
  arch.classes = static_cast<int>(arch_t.values[4]);
  arch.decoder = arch_t.values[5] != 0.0f;

  Checkpoint ck{ModelBundle<float>(arch, 0), {}};
  auto& params = ck.model.params();
  if (count - 1 != params.size()) throw format_error("checkpoint: parameter count does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    RawTensor t = read_tensor(r);
    auto& p = params[static_cast<int>(i)];
    if (t.name != p.name || t.dims != p.dims) throw format_error("checkpoint: unexpected tensor " + t.name);
    p.value = std::move(t.values);
  }

  const std::uint32_t state_count = r.u32();
  if (state_count != params.size()) throw format_error("checkpoint: optimizer block does not match parameters");
  ck.optimizer = SgdState<float>(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    RawTensor t = read_tensor(r);
    const auto& p = params[static_cast<int>(i)];
    if (t.name != std::string(kVelocityPrefix) + p.name || t.dims != p.dims)
      throw format_error("checkpoint: unexpected optimizer tensor " + t.name);
    ck.optimizer.velocity[i] = std::move(t.values);
  }
  if (r.remaining() != 0) throw format_error("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& model,
                     const SgdState<float>& optimizer) {
  io::write_file_atomic(path, encode_checkpoint(model, optimizer));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace alignmix::model
