#include "alignmix/cli/commands.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <json.hpp>
#include <random>

#include "alignmix/cli/data.hpp"
#include "alignmix/cli/ppm.hpp"
#include "alignmix/errors.hpp"
#include "alignmix/eval/attacks.hpp"
#include "alignmix/io/binary.hpp"
#include "alignmix/model/checkpoint.hpp"
#include "alignmix/model/interpolation.hpp"
#include "alignmix/ot/hungarian.hpp"

namespace alignmix::cli {

namespace {

using Json = nlohmann::ordered_json;

// Independent generator per purpose so adding draws in one place never shifts another.
mixup::Rng make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return mixup::Rng(seq);
}

constexpr std::uint32_t kTrainStream = 0x74726e;
constexpr std::uint32_t kAttackStream = 0x61746b;
constexpr std::uint32_t kOodStream = 0x6f6f64;
constexpr std::uint32_t kCheckStream = 0x736b63;

fs::path prepare_out(const RunConfig& cfg, std::string_view verb) {
  const fs::path out = cfg.out_dir();
  fs::create_directories(out);
  io::write_file_atomic(out / fmt::format("{}.effective.cfg", verb), cfg.echo());
  return out;
}

fs::path require_path(const RunConfig& cfg, std::string_view key) {
  auto p = cfg.path(key);
  if (p.empty()) throw parameter_error(fmt::format("config key '{}' must be set", key));
  return p;
}

fs::path checkpoint_path(const RunConfig& cfg) {
  auto p = cfg.path("checkpoint");
  return p.empty() ? cfg.out_dir() / "checkpoint.amck" : p;
}

void check_compatible(const model::Architecture& a, const Dataset& d, std::string_view what) {
  if (d.channels != a.in_channels || d.height != a.image_size || d.width != a.image_size || d.classes != a.classes)
    throw dimension_error(fmt::format("{}: dataset {}x{}x{} with {} classes does not match the checkpoint "
                                      "({}x{}x{}, {} classes)",
                                      what, d.channels, d.height, d.width, d.classes, a.in_channels,
                                      a.image_size, a.image_size, a.classes));
}

std::string real_text(double v) { return fmt::format("{:.17g}", v); }

double json_number(double v) {
  if (!std::isfinite(v)) throw numeric_error("non-finite value in metric report");
  return v;
}

}  // namespace

GenSynthResult cmd_gen_synth(const RunConfig& cfg) {
  SynthSpec spec;
  spec.classes = static_cast<int>(cfg.integer("synth_classes"));
  spec.image_size = static_cast<int>(cfg.integer("synth_image_size"));
  spec.channels = static_cast<int>(cfg.integer("synth_channels"));
  spec.train_count = static_cast<int>(cfg.integer("synth_train_count"));
  spec.test_count = static_cast<int>(cfg.integer("synth_test_count"));
  spec.noise = cfg.real("synth_noise");
  spec.validate();
  const fs::path out = prepare_out(cfg, "gen-synth");
  const SynthPair pair = generate_synthetic(spec, cfg.seed());
  GenSynthResult r{out / "train.amix", out / "test.amix"};
  save_dataset(r.train, pair.train);
  save_dataset(r.test, pair.test);
  return r;
}

TrainResult cmd_train(const RunConfig& cfg, const EpochCallback& on_epoch) {
  const model::TrainConfig tc = cfg.train_config();
  const Dataset train = load_dataset(require_path(cfg, "train_data"));
  const fs::path test_path = cfg.path("test_data");
  const Dataset test = test_path.empty() ? Dataset{} : load_dataset(test_path);
  if (train.height != train.width) throw dimension_error("train: images must be square");
  const model::Architecture arch = cfg.architecture(train.channels, train.height, train.classes);
  if (!test_path.empty()) check_compatible(arch, test, "train");
  const fs::path out = prepare_out(cfg, "train");

  model::ModelBundle<float> net(arch, tc.seed);
  model::SgdState<float> state(net.params());
  mixup::Rng rng = make_rng(tc.seed, kTrainStream);

  TrainResult result;
  result.checkpoint = out / "checkpoint.amck";
  result.log = out / "train_log.csv";
  result.final_test_error = std::numeric_limits<double>::quiet_NaN();
  std::string log = "epoch,clean,input,latent,feat,feat_prime,mean_loss,test_error,lr\n";
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    EpochRecord rec;
    rec.stats = model::run_epoch(net, state, train, tc, epoch, rng);
    rec.test_error = std::numeric_limits<double>::quiet_NaN();
    if (!test_path.empty()) {
      const auto preds = eval::predict_all(net, test);
      rec.test_error = eval::top1_error(preds);
    }
    const auto& m = rec.stats.mode_counts;
    log += fmt::format("{},{},{},{},{},{},{:.6f},{},{:.6g}\n", epoch + 1, m[0], m[1], m[2], m[3], m[4],
                       rec.stats.mean_loss, std::isnan(rec.test_error) ? "" : fmt::format("{:.2f}", rec.test_error),
                       rec.stats.lr);
    result.epochs.push_back(rec);
    result.final_test_error = rec.test_error;
    if (on_epoch) on_epoch(rec);
  }
  io::write_file_atomic(result.log, log);
  model::save_checkpoint(result.checkpoint, net, state);
  return result;
}

EvalResult cmd_eval(const RunConfig& cfg) {
  const int bins = static_cast<int>(cfg.integer("ece_bins"));
  if (bins < 1) throw parameter_error("eval: ece_bins must be >= 1");
  const fs::path ckpt = checkpoint_path(cfg);
  const fs::path data_path = require_path(cfg, "test_data");
  const auto net = model::load_checkpoint(ckpt).model;
  const Dataset data = load_dataset(data_path);
  check_compatible(net.arch(), data, "eval");
  if (data.count() == 0) throw parameter_error("eval: empty dataset");
  const fs::path out = prepare_out(cfg, "eval");

  const auto preds = eval::predict_all(net, data);
  EvalResult r;
  r.top1_error = eval::top1_error(preds);
  r.calibration = eval::calibration(preds, bins);
  r.report = out / "eval.json";
  r.reliability = out / "reliability.csv";

  std::string csv = "bin_lo,bin_hi,count,mean_conf,accuracy\n";
  for (const auto& b : r.calibration.bins)
    csv += fmt::format("{},{},{},{},{}\n", real_text(b.lo), real_text(b.hi), b.count, real_text(b.mean_confidence),
                       real_text(b.accuracy));
  Json j;
  j["checkpoint"] = ckpt.string();
  j["dataset"] = data_path.string();
  j["count"] = data.count();
  j["top1_error"] = json_number(r.top1_error);
  j["ece"] = json_number(r.calibration.ece);
  j["ece_bins"] = bins;
  io::write_file_atomic(r.reliability, csv);
  io::write_file_atomic(r.report, j.dump(2) + "\n");
  return r;
}

AttackResult cmd_attack(const RunConfig& cfg) {
  const std::string kind_name = cfg.text("attack");
  eval::AttackKind kind{};
  if (kind_name == "fgsm") kind = eval::AttackKind::fgsm;
  else if (kind_name == "pgd") kind = eval::AttackKind::pgd;
  else throw parameter_error(fmt::format("attack: unknown attack '{}' (expected fgsm or pgd)", kind_name));
  const auto epsilons = cfg.real_list("attack_epsilons");
  if (epsilons.empty()) throw parameter_error("attack: attack_epsilons is empty");
  eval::AttackConfig base = cfg.attack_config();

  const fs::path ckpt = checkpoint_path(cfg);
  const auto net = model::load_checkpoint(ckpt).model;
  const Dataset data = load_dataset(require_path(cfg, "test_data"));
  check_compatible(net.arch(), data, "attack");
  if (data.count() == 0) throw parameter_error("attack: empty dataset");
  const fs::path out = prepare_out(cfg, "attack");

  AttackResult r;
  r.attack = kind_name;
  r.report = out / "attack.json";
  Json points = Json::array();
  for (double eps : epsilons) {
    eval::AttackConfig ac = base;
    ac.epsilon = eps;
    ac.step_size = std::min(base.step_size, eps);
    auto rng = make_rng(cfg.seed(), kAttackStream);
    const auto rep = eval::evaluate_attack(net, data, kind, ac, rng);
    r.clean_error = rep.clean_error;
    r.points.push_back({eps, ac.step_size, rep.robust_error, rep.max_perturbation});
    Json p;
    p["epsilon"] = json_number(eps);
    if (kind == eval::AttackKind::pgd) {
      p["step_size"] = json_number(ac.step_size);
      p["steps"] = ac.num_steps;
    }
    p["robust_error"] = json_number(rep.robust_error);
    p["max_perturbation"] = json_number(rep.max_perturbation);
    points.push_back(p);
  }
  Json j;
  j["attack"] = kind_name;
  j["checkpoint"] = ckpt.string();
  j["count"] = data.count();
  j["clean_error"] = json_number(r.clean_error);
  j["results"] = points;
  io::write_file_atomic(r.report, j.dump(2) + "\n");
  return r;
}

OodResult cmd_ood(const RunConfig& cfg) {
  const double threshold = cfg.real("ood_threshold");
  const std::string source = cfg.text("ood_source");
  const fs::path ckpt = checkpoint_path(cfg);
  const auto net = model::load_checkpoint(ckpt).model;
  const Dataset id = load_dataset(require_path(cfg, "test_data"));
  check_compatible(net.arch(), id, "ood");

  Dataset ood;
  if (source == "file") {
    ood = load_dataset(require_path(cfg, "ood_data"));
    if (ood.channels != id.channels || ood.height != id.height || ood.width != id.width)
      throw dimension_error("ood: OOD images differ in shape from the ID images");
    ood.classes = id.classes;
    for (auto& l : ood.labels) l = 0;
  } else if (source == "uniform" || source == "gaussian") {
    const auto n = cfg.integer("ood_count");
    if (n < 0) throw parameter_error("ood: ood_count must be nonnegative");
    const int count = n == 0 ? static_cast<int>(id.count()) : static_cast<int>(n);
    ood = generate_noise(source == "uniform" ? NoiseKind::uniform : NoiseKind::gaussian, count, id.channels,
                         id.height, id.width, id.classes, make_rng(cfg.seed(), kOodStream)());
  } else {
    throw parameter_error(fmt::format("ood: unknown ood_source '{}' (expected uniform, gaussian or file)", source));
  }
  if (id.count() == 0 || ood.count() == 0) throw parameter_error("ood: both sets must be nonempty");
  const fs::path out = prepare_out(cfg, "ood");

  OodResult r;
  for (const auto& p : eval::predict_all(net, id)) r.scores.id_scores.push_back(p.confidence);
  for (const auto& p : eval::predict_all(net, ood)) r.scores.ood_scores.push_back(p.confidence);
  r.metrics = eval::ood_metrics(r.scores, threshold);
  r.report = out / "ood.json";
  r.scores_csv = out / "ood_scores.csv";

  std::string csv = "set,score\n";
  for (double s : r.scores.id_scores) csv += fmt::format("id,{}\n", real_text(s));
  for (double s : r.scores.ood_scores) csv += fmt::format("ood,{}\n", real_text(s));
  Json j;
  j["checkpoint"] = ckpt.string();
  j["ood_source"] = source;
  j["id_count"] = id.count();
  j["ood_count"] = ood.count();
  j["threshold"] = json_number(threshold);
  j["det_acc"] = json_number(r.metrics.det_acc);
  j["auroc"] = json_number(r.metrics.auroc);
  j["aupr_id"] = json_number(r.metrics.aupr_id);
  j["aupr_ood"] = json_number(r.metrics.aupr_ood);
  io::write_file_atomic(r.scores_csv, csv);
  io::write_file_atomic(r.report, j.dump(2) + "\n");
  return r;
}

VisualizeResult cmd_visualize(const RunConfig& cfg) {
  const auto mode = model::parse_interpolation_mode(cfg.text("vis_mode"));
  const auto lambdas = cfg.real_list("vis_lambdas");
  if (lambdas.empty()) throw parameter_error("visualize: vis_lambdas is empty");
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw parameter_error("visualize: lambdas must lie in [0, 1]");
  const auto net = model::load_checkpoint(checkpoint_path(cfg)).model;
  if (!net.arch().decoder) throw unsupported_error("visualize: the checkpoint has no decoder");
  fs::path data_path = cfg.path("vis_data");
  if (data_path.empty()) data_path = require_path(cfg, "test_data");
  const Dataset data = load_dataset(data_path);
  check_compatible(net.arch(), data, "visualize");
  const auto i1 = cfg.integer("vis_first"), i2 = cfg.integer("vis_second");
  const auto n = static_cast<std::int64_t>(data.count());
  if (i1 < 0 || i1 >= n || i2 < 0 || i2 >= n) throw parameter_error("visualize: image index out of range");
  const fs::path out = prepare_out(cfg, "visualize");

  const auto x = data.image<float>(static_cast<std::size_t>(i1));
  const auto x2 = data.image<float>(static_cast<std::size_t>(i2));
  std::vector<Tensor3<float>> tiles{x, x2};
  for (auto& d : model::decode_interpolation(net, x, x2, mode, lambdas, cfg.sinkhorn_config()))
    tiles.push_back(std::move(d));

  VisualizeResult r;
  r.image = out / fmt::format("interpolation_{}.ppm", model::to_string(mode));
  r.tiles = static_cast<int>(tiles.size());
  r.width = x.width * r.tiles;
  r.height = x.height;
  io::write_file_atomic(r.image, encode_ppm_row(tiles));
  return r;
}

SinkhornCheckResult cmd_sinkhorn_check(const RunConfig& cfg) {
  const int r = static_cast<int>(cfg.integer("check_size"));
  const int trials = static_cast<int>(cfg.integer("check_trials"));
  const auto epsilons = cfg.real_list("check_epsilons");
  if (r < 1 || r > 16) throw parameter_error("sinkhorn-check: check_size must lie in 1..16");
  if (trials < 1) throw parameter_error("sinkhorn-check: check_trials must be >= 1");
  if (epsilons.empty()) throw parameter_error("sinkhorn-check: check_epsilons is empty");
  ot::SinkhornConfig sc;
  sc.max_iters = static_cast<int>(cfg.integer("check_iters"));
  sc.marginal_tol = cfg.real("check_tol");
  for (double e : epsilons) {
    sc.epsilon = e;
    sc.validate();
  }
  const fs::path out = prepare_out(cfg, "sinkhorn-check");

  auto rng = make_rng(cfg.seed(), kCheckStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SinkhornCheckResult result;
  result.csv = out / "sinkhorn_check.csv";
  std::string csv =
      "trial,epsilon,entropic_cost,exact_cost,relative_gap,marginal_deviation,entropy,iterations,log_domain,"
      "rounded\n";
  result.plans = out / "sinkhorn_plans.csv";
  std::string plans = "trial,epsilon,i,j,cost,plan\n";
  for (int t = 0; t < trials; ++t) {
    ot::CostMatrix cost{Matrix(r, r)};
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) cost.values(i, j) = unit(rng);
    const double exact = ot::solve_linear_assignment(cost.values).cost / r;
    for (double e : epsilons) {
      sc.epsilon = e;
      const auto plan = ot::sinkhorn(cost, sc);
      SinkhornCheckRow row;
      row.trial = t;
      row.epsilon = e;
      row.entropic_cost = ot::transport_cost(plan, cost);
      row.exact_cost = exact;
      row.relative_gap = exact > 0.0 ? (row.entropic_cost - exact) / exact : row.entropic_cost;
      row.marginal_deviation = plan.max_marginal_deviation;
      row.entropy = ot::plan_entropy(plan);
      row.iterations = plan.iterations;
      row.log_domain = plan.log_domain;
      row.rounded = plan.rounded;
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t, real_text(e), real_text(row.entropic_cost),
                         real_text(exact), real_text(row.relative_gap), real_text(row.marginal_deviation),
                         real_text(row.entropy), row.iterations, row.log_domain ? 1 : 0, row.rounded ? 1 : 0);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          plans += fmt::format("{},{},{},{},{},{}\n", t, real_text(e), i, j, real_text(cost.values(i, j)),
                               real_text(plan.values(i, j)));
      result.rows.push_back(row);
    }
  }
  io::write_file_atomic(result.csv, csv);
  io::write_file_atomic(result.plans, plans);
  return result;
}

}  // namespace alignmix::cli
