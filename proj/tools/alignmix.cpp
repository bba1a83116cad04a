// alignmix <verb> [--config FILE] [--seed N] [--out DIR] [--<key> VALUE ...]

#include <CLI11.hpp>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fmt/format.h>
#include <map>
#include <string>

#include "alignmix/cli/commands.hpp"
#include "alignmix/cli/config.hpp"

namespace cli = alignmix::cli;

namespace {

void run(const std::string& verb, const cli::RunConfig& cfg) {
  if (verb == "gen-synth") {
    const auto r = cli::cmd_gen_synth(cfg);
    fmt::print("wrote {}\nwrote {}\n", r.train.string(), r.test.string());
  } else if (verb == "train") {
    const auto r = cli::cmd_train(cfg, [](const cli::EpochRecord& e) {
      fmt::print("epoch {:3d}  loss {:.4f}  test error {:6.2f}%  lr {:.4g}\n", e.stats.epoch + 1, e.stats.mean_loss,
                 e.test_error, e.stats.lr);
    });
    fmt::print("wrote {}\nwrote {}\n", r.checkpoint.string(), r.log.string());
  } else if (verb == "eval") {
    const auto r = cli::cmd_eval(cfg);
    fmt::print("top-1 error {:.2f}%  ECE {:.4f}\nwrote {}\n", r.top1_error, r.calibration.ece, r.report.string());
  } else if (verb == "attack") {
    const auto r = cli::cmd_attack(cfg);
    fmt::print("{}: clean error {:.2f}%\n", r.attack, r.clean_error);
    for (const auto& p : r.points)
      fmt::print("  eps {:.5f}  robust error {:6.2f}%  max |dx| {:.5f}\n", p.epsilon, p.robust_error,
                 p.max_perturbation);
    fmt::print("wrote {}\n", r.report.string());
  } else if (verb == "ood") {
    const auto r = cli::cmd_ood(cfg);
    fmt::print("det_acc {:.4f}  auroc {:.4f}  aupr_id {:.4f}  aupr_ood {:.4f}\nwrote {}\n", r.metrics.det_acc,
               r.metrics.auroc, r.metrics.aupr_id, r.metrics.aupr_ood, r.report.string());
  } else if (verb == "visualize") {
    const auto r = cli::cmd_visualize(cfg);
    fmt::print("wrote {} ({}x{}, {} tiles)\n", r.image.string(), r.width, r.height, r.tiles);
  } else if (verb == "sinkhorn-check") {
    const auto r = cli::cmd_sinkhorn_check(cfg);
    std::map<double, std::pair<int, int>> within;
    for (const auto& row : r.rows) {
      auto& [ok, n] = within[row.epsilon];
      ok += std::abs(row.relative_gap) < 0.01 ? 1 : 0;
      ++n;
    }
    for (const auto& [eps, c] : within)
      fmt::print("eps {:g}: {}/{} trials within 1% of the exact cost\n", eps, c.first, c.second);
    fmt::print("wrote {}\n", r.csv.string());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AlignMix: mixup on aligned feature tensors"};
  app.option_defaults()->always_capture_default();
  std::string verb;
  app.add_option("verb", verb, "gen-synth | train | eval | attack | ood | visualize | sinkhorn-check")
      ->required()
      ->check(CLI::IsMember({"gen-synth", "train", "eval", "attack", "ood", "visualize", "sinkhorn-check"}));
  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file");

  std::map<std::string, std::string> overrides;
  for (const auto& key : cli::config_keys()) {
    const std::string name(key.name);
    std::string help(key.help);
    help += help.empty() ? "" : " ";
    help += fmt::format("(default {})", key.default_value.empty() ? "unset" : key.default_value);
    app.add_option_function<std::string>(
        "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; }, help);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    cli::RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v, std::filesystem::current_path());
    run(verb, cfg);
  } catch (const std::exception& e) {
    fmt::print(stderr, "alignmix {}: {}\n", verb, e.what());
    return 1;
  }
  return 0;
}
