#include "alignmix/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>

#include "alignmix/errors.hpp"
#include "alignmix/io/binary.hpp"

namespace alignmix::cli {

namespace fs = std::filesystem;

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"seed", KeyKind::integer, "0", "master seed"},
      {"out", KeyKind::path, "out", "output directory"},
      {"train_data", KeyKind::path, "", "training set (AMIX)"},
      {"test_data", KeyKind::path, "", "test set (AMIX)"},
      {"checkpoint", KeyKind::path, "", "checkpoint to read; defaults to <out>/checkpoint.amck"},
      // gen-synth
      {"synth_classes", KeyKind::integer, "4", "number of shape classes (2..16)"},
      {"synth_image_size", KeyKind::integer, "16", "16 or 32"},
      {"synth_channels", KeyKind::integer, "1", "1 or 3"},
      {"synth_train_count", KeyKind::integer, "2000", ""},
      {"synth_test_count", KeyKind::integer, "400", ""},
      {"synth_noise", KeyKind::real, "0.08", "pixel noise standard deviation"},
      // model
      {"channels", KeyKind::integer, "16", "feature channels c"},
      {"feature_size", KeyKind::integer, "4", "spatial size of A (2, 4 or 8)"},
      {"decoder", KeyKind::boolean, "true", "train the decoder with the reconstruction loss"},
      // training
      {"alpha", KeyKind::real, "2.0", "Beta(alpha, alpha) for lambda"},
      {"sinkhorn_epsilon", KeyKind::real, "0.1", ""},
      {"sinkhorn_iters", KeyKind::integer, "100", ""},
      {"sinkhorn_tol", KeyKind::real, "1e-9", "early-stop marginal tolerance"},
      {"layer_set", KeyKind::text, "x,A,z", "subset of {x, A, z} that may be mixed"},
      {"align", KeyKind::boolean, "true", "align feature tensors before mixing"},
      {"lr", KeyKind::real, "0.005", "initial learning rate"},
      {"lr_decay", KeyKind::real, "0.1", ""},
      {"lr_decay_epochs", KeyKind::integer, "40", "epochs between decays"},
      {"momentum", KeyKind::real, "0.9", ""},
      {"weight_decay", KeyKind::real, "1e-4", ""},
      {"batch_size", KeyKind::integer, "16", ""},
      {"epochs", KeyKind::integer, "50", ""},
      // eval / ood
      {"ece_bins", KeyKind::integer, "15", ""},
      {"ood_source", KeyKind::text, "uniform", "uniform, gaussian or file"},
      {"ood_data", KeyKind::path, "", "OOD set when ood_source = file"},
      {"ood_count", KeyKind::integer, "0", "generated OOD images; 0 means the ID count"},
      {"ood_threshold", KeyKind::real, "0.5", ""},
      // attack
      {"attack", KeyKind::text, "fgsm", "fgsm or pgd"},
      {"attack_epsilons", KeyKind::real_list, "0,2/255,4/255,8/255", ""},
      {"attack_step", KeyKind::real, "2/255", "PGD step size"},
      {"attack_steps", KeyKind::integer, "7", "PGD iterations"},
      {"attack_random_start", KeyKind::boolean, "true", ""},
      // visualize
      {"vis_data", KeyKind::path, "", "images to decode; defaults to test_data"},
      {"vis_first", KeyKind::integer, "0", ""},
      {"vis_second", KeyKind::integer, "1", ""},
      {"vis_mode", KeyKind::text, "aligned_base", "latent, aligned_base or aligned_prime"},
      {"vis_lambdas", KeyKind::real_list, "0,0.2,0.4,0.6,0.8,1", ""},
      // sinkhorn-check
      {"check_size", KeyKind::integer, "8", "r"},
      {"check_trials", KeyKind::integer, "200", ""},
      {"check_epsilons", KeyKind::real_list, "1e-3,1e-2,1e-1,1", ""},
      {"check_iters", KeyKind::integer, "20000", ""},
      {"check_tol", KeyKind::real, "1e-6", ""},
  };
  return keys;
}

namespace {

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::int64_t parse_integer(std::string_view text) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) throw parameter_error(fmt::format("not an integer: '{}'", text));
  return v;
}

bool parse_boolean(std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw parameter_error(fmt::format("not a boolean: '{}'", text));
}

double parse_plain(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end || !std::isfinite(v))
    throw parameter_error(fmt::format("not a number: '{}'", text));
  return v;
}

void check_value(const KeySpec& spec, std::string_view value) {
  switch (spec.kind) {
    case KeyKind::integer: parse_integer(value); break;
    case KeyKind::real: parse_real(value); break;
    case KeyKind::boolean: parse_boolean(value); break;
    case KeyKind::real_list: parse_real_list(value); break;
    case KeyKind::text:
    case KeyKind::path: break;
  }
}

}  // namespace

double parse_real(std::string_view text) {
  text = trim(text);
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_plain(text);
  const double den = parse_plain(trim(text.substr(slash + 1)));
  if (den == 0.0) throw parameter_error(fmt::format("zero denominator in '{}'", text));
  return parse_plain(trim(text.substr(0, slash))) / den;
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(parse_real(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_.emplace(std::string(k.name), std::string(k.default_value));
}

void RunConfig::set(std::string_view key, std::string_view value, const fs::path& base_dir) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw parameter_error(fmt::format("unknown config key '{}'", key));
  value = trim(value);
  check_value(*spec, value);
  std::string stored(value);
  if (spec->kind == KeyKind::path && !stored.empty()) {
    fs::path p(stored);
    if (p.is_relative()) p = base_dir / p;
    stored = fs::absolute(p).lexically_normal().string();
  }
  values_[std::string(key)] = std::move(stored);
}

void RunConfig::parse_text(std::string_view text, const fs::path& base_dir) {
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw parameter_error(fmt::format("config line {}: expected key = value", line_no));
    const auto key = trim(line.substr(0, eq));
    try {
      set(key, line.substr(eq + 1), base_dir);
    } catch (const parameter_error& e) {
      throw parameter_error(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
}

void RunConfig::load_file(const fs::path& path) {
  const auto bytes = io::read_file(path);
  const std::string text(bytes.begin(), bytes.end());
  parse_text(text, fs::absolute(path).parent_path());
}

bool RunConfig::has_key(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::raw(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw parameter_error(fmt::format("unknown config key '{}'", key));
  return it->second;
}

std::int64_t RunConfig::integer(std::string_view key) const { return parse_integer(raw(key)); }
double RunConfig::real(std::string_view key) const { return parse_real(raw(key)); }
bool RunConfig::boolean(std::string_view key) const { return parse_boolean(raw(key)); }
std::string RunConfig::text(std::string_view key) const { return raw(key); }
std::vector<double> RunConfig::real_list(std::string_view key) const { return parse_real_list(raw(key)); }

fs::path RunConfig::path(std::string_view key) const {
  const auto& v = raw(key);
  if (v.empty()) return {};
  return fs::absolute(fs::path(v)).lexically_normal();
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& k : config_keys()) {
    std::string value = raw(k.name);
    if (k.kind == KeyKind::path && !value.empty()) value = path(k.name).string();
    out += fmt::format("{} = {}\n", k.name, value);
  }
  return out;
}

std::uint64_t RunConfig::seed() const {
  const auto s = integer("seed");
  if (s < 0) throw parameter_error("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

fs::path RunConfig::out_dir() const {
  auto p = path("out");
  if (p.empty()) throw parameter_error("out must be set");
  return p;
}

model::Architecture RunConfig::architecture(int in_channels, int image_size, int classes) const {
  model::Architecture a;
  a.in_channels = in_channels;
  a.image_size = image_size;
  a.classes = classes;
  a.channels = static_cast<int>(integer("channels"));
  a.feature_size = static_cast<int>(integer("feature_size"));
  a.decoder = boolean("decoder");
  a.validate();
  return a;
}

ot::SinkhornConfig RunConfig::sinkhorn_config() const {
  ot::SinkhornConfig s;
  s.epsilon = real("sinkhorn_epsilon");
  s.max_iters = static_cast<int>(integer("sinkhorn_iters"));
  s.marginal_tol = real("sinkhorn_tol");
  s.validate();
  return s;
}

mixup::LayerSet RunConfig::layer_set() const {
  mixup::LayerSet set{false, false, false};
  for (std::string_view rest = raw("layer_set"); !rest.empty();) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item == "x") set.input = true;
    else if (item == "A") set.feature = true;
    else if (item == "z") set.latent = true;
    else if (item == "none" || item.empty()) continue;
    else throw parameter_error(fmt::format("layer_set: unknown entry '{}' (expected x, A, z or none)", item));
  }
  return set;
}

model::TrainConfig RunConfig::train_config() const {
  model::TrainConfig t;
  t.alpha = real("alpha");
  t.sinkhorn = sinkhorn_config();
  t.lr.initial = real("lr");
  t.lr.decay = real("lr_decay");
  t.lr.period = static_cast<int>(integer("lr_decay_epochs"));
  t.momentum = real("momentum");
  t.weight_decay = real("weight_decay");
  t.batch_size = static_cast<int>(integer("batch_size"));
  t.epochs = static_cast<int>(integer("epochs"));
  t.seed = seed();
  t.layers = layer_set();
  t.align = boolean("align");
  t.validate();
  return t;
}

eval::AttackConfig RunConfig::attack_config() const {
  eval::AttackConfig a;
  a.step_size = real("attack_step");
  a.num_steps = static_cast<int>(integer("attack_steps"));
  a.random_start = boolean("attack_random_start");
  return a;
}

}  // namespace alignmix::cli
