#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a comment.
// Every key has a default; unknown keys are rejected. Relative paths are resolved
// against the directory of the file that set them (the working directory for
// command-line overrides).

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "alignmix/eval/attacks.hpp"
#include "alignmix/mixup/mixup.hpp"
#include "alignmix/model/network.hpp"
#include "alignmix/model/trainer.hpp"
#include "alignmix/ot/align.hpp"

namespace alignmix::cli {

enum class KeyKind { integer, real, boolean, text, path, real_list };

struct KeySpec {
  std::string_view name;
  KeyKind kind;
  std::string_view default_value;
  std::string_view help;
};

/// All recognised keys, in echo order.
const std::vector<KeySpec>& config_keys();

class RunConfig {
public:
  RunConfig();

  /// Parses `path` and merges it over the current values.
  void load_file(const std::filesystem::path& path);
  void parse_text(std::string_view text, const std::filesystem::path& base_dir);
  /// Sets one key; relative paths resolve against base_dir.
  void set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir);

  [[nodiscard]] bool has_key(std::string_view key) const;
  [[nodiscard]] const std::string& raw(std::string_view key) const;

  [[nodiscard]] std::int64_t integer(std::string_view key) const;
  [[nodiscard]] double real(std::string_view key) const;
  [[nodiscard]] bool boolean(std::string_view key) const;
  [[nodiscard]] std::string text(std::string_view key) const;
  [[nodiscard]] std::filesystem::path path(std::string_view key) const;  // empty when unset
  [[nodiscard]] std::vector<double> real_list(std::string_view key) const;

  /// Effective configuration in `key = value` form; paths are absolute.
  [[nodiscard]] std::string echo() const;

  // Typed views.
  [[nodiscard]] std::uint64_t seed() const;
  [[nodiscard]] std::filesystem::path out_dir() const;
  [[nodiscard]] model::Architecture architecture(int in_channels, int image_size, int classes) const;
  [[nodiscard]] model::TrainConfig train_config() const;
  [[nodiscard]] ot::SinkhornConfig sinkhorn_config() const;
  [[nodiscard]] eval::AttackConfig attack_config() const;
  [[nodiscard]] mixup::LayerSet layer_set() const;

private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Parses "0.5", "1e-3" or "8/255".
double parse_real(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);

}  // namespace alignmix::cli
