#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "alignmix/cli/commands.hpp"
#include "alignmix/cli/config.hpp"
#include "alignmix/cli/data.hpp"
#include "alignmix/cli/ppm.hpp"
#include "alignmix/errors.hpp"
#include "alignmix/io/binary.hpp"
#include "alignmix/model/checkpoint.hpp"

using namespace alignmix;
using namespace alignmix::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("alignmix_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  const auto b = io::read_file(p);
  return {b.begin(), b.end()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

// Small synthetic setup shared by the command tests.
RunConfig small_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.set("out", dir.string(), dir);
  cfg.set("synth_train_count", "64", dir);
  cfg.set("synth_test_count", "24", dir);
  cfg.set("channels", "4", dir);
  cfg.set("batch_size", "16", dir);
  cfg.set("epochs", "2", dir);
  cfg.set("seed", "3", dir);
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  TempDir tmp("config");
  RunConfig cfg;
  CHECK(cfg.real("alpha") == 2.0);
  CHECK(cfg.real("sinkhorn_epsilon") == 0.1);
  CHECK(cfg.integer("sinkhorn_iters") == 100);
  CHECK(cfg.real("ood_threshold") == 0.5);
  CHECK(cfg.integer("ece_bins") == 15);
  CHECK(cfg.attack_config().num_steps == 7);

  cfg.parse_text("# comment\n alpha = 1.5  \n\ntrain_data = data/train.amix # trailing\nattack_epsilons = 0, 8/255\n",
                 tmp.path);
  CHECK(cfg.real("alpha") == 1.5);
  CHECK(cfg.path("train_data") == (tmp.path / "data" / "train.amix").lexically_normal());
  const auto eps = cfg.real_list("attack_epsilons");
  REQUIRE(eps.size() == 2);
  CHECK(eps[1] == 8.0 / 255.0);

  CHECK_THROWS_AS(cfg.parse_text("layer_sett = x\n", tmp.path), parameter_error);
  CHECK_THROWS_AS(cfg.parse_text("alpha 2\n", tmp.path), parameter_error);
  CHECK_THROWS_AS(cfg.set("epochs", "ten", tmp.path), parameter_error);
  CHECK_THROWS_AS(cfg.set("decoder", "maybe", tmp.path), parameter_error);

  cfg.set("layer_set", "x, z", tmp.path);
  const auto ls = cfg.layer_set();
  CHECK(ls.input);
  CHECK(ls.latent);
  CHECK_FALSE(ls.feature);
  cfg.set("layer_set", "x,B", tmp.path);
  CHECK_THROWS_AS((void)cfg.layer_set(), parameter_error);
}

TEST_CASE("config files resolve paths against their own directory and echo round-trips") {
  TempDir tmp("config_file");
  fs::create_directories(tmp.path / "sub");
  {
    std::ofstream f(tmp.path / "sub" / "run.cfg");
    f << "test_data = ../d/test.amix\nout = results\nlr = 0.05\n";
  }
  RunConfig cfg;
  cfg.load_file(tmp.path / "sub" / "run.cfg");
  CHECK(cfg.path("test_data") == (tmp.path / "d" / "test.amix").lexically_normal());
  CHECK(cfg.out_dir() == (tmp.path / "sub" / "results").lexically_normal());

  const std::string echo = cfg.echo();
  {
    std::ofstream f(tmp.path / "echo.cfg");
    f << echo;
  }
  RunConfig again;
  again.load_file(tmp.path / "echo.cfg");
  CHECK(again.echo() == echo);
  CHECK(lines(echo).size() == config_keys().size());
}

TEST_CASE("dataset files") {
  SynthSpec spec;
  spec.train_count = 2000;
  spec.test_count = 400;
  const auto pair = generate_synthetic(spec, 0);
  const auto bytes = encode_dataset(pair.train);
  CHECK(bytes.size() == 28 + 2000 * 256 * 4 + 2000 * 4);
  CHECK(encode_dataset(pair.test).size() == 28 + 400 * 256 * 4 + 400 * 4);
  CHECK(decode_dataset(bytes) == pair.train);

  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_dataset(longer), format_error);
  auto shorter = bytes;
  shorter.pop_back();
  CHECK_THROWS_AS(decode_dataset(shorter), format_error);
  auto magic = bytes;
  magic[1] = 'X';
  CHECK_THROWS_AS(decode_dataset(magic), format_error);

  Dataset bad = pair.test;
  bad.labels[0] = 4;
  CHECK_THROWS_AS(encode_dataset(bad), format_error);
  bad = pair.test;
  bad.pixels[5] = 1.5f;
  CHECK_THROWS_AS(encode_dataset(bad), format_error);

  // a label >= k written by hand is rejected on read
  auto raw = encode_dataset(pair.test);
  raw[raw.size() - 4] = 9;
  CHECK_THROWS_AS(decode_dataset(raw), format_error);
}

TEST_CASE("synthetic shapes") {
  SynthSpec spec;
  spec.train_count = 400;
  spec.test_count = 200;
  const auto a = generate_synthetic(spec, 11);
  const auto b = generate_synthetic(spec, 11);
  CHECK(encode_dataset(a.train) == encode_dataset(b.train));
  CHECK(encode_dataset(a.test) == encode_dataset(b.test));
  CHECK(a.train.pixels != generate_synthetic(spec, 12).train.pixels);
  CHECK(std::vector<float>(a.train.pixels.begin(), a.train.pixels.begin() + 256) !=
        std::vector<float>(a.test.pixels.begin(), a.test.pixels.begin() + 256));

  // nearest class centroid beats chance
  const std::size_t n = a.train.image_size();
  std::vector<std::vector<double>> centroid(4, std::vector<double>(n, 0.0));
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < a.train.count(); ++i) {
    const auto l = a.train.labels[i];
    ++counts[l];
    for (std::size_t k = 0; k < n; ++k) centroid[l][k] += a.train.pixels[i * n + k];
  }
  for (int c = 0; c < 4; ++c)
    for (auto& v : centroid[static_cast<std::size_t>(c)]) v /= counts[static_cast<std::size_t>(c)];
  int correct = 0;
  for (std::size_t i = 0; i < a.test.count(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 4; ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = a.test.pixels[i * n + k] - centroid[static_cast<std::size_t>(c)][k];
        d += e * e;
      }
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == static_cast<int>(a.test.labels[i]) ? 1 : 0;
  }
  CHECK(correct / 200.0 > 0.25 + 0.1);

  spec.classes = 17;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), parameter_error);
  spec.classes = 16;
  spec.image_size = 32;
  spec.channels = 3;
  spec.train_count = 32;
  spec.test_count = 0;
  const auto big = generate_synthetic(spec, 1);
  CHECK(big.train.pixels.size() == 32u * 3 * 32 * 32);
  spec.image_size = 24;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), parameter_error);
}

TEST_CASE("noise sets") {
  const auto u = generate_noise(NoiseKind::uniform, 50, 1, 16, 16, 4, 1);
  const auto g = generate_noise(NoiseKind::gaussian, 50, 1, 16, 16, 4, 1);
  double mu = 0.0, mg = 0.0;
  int at_edge = 0;
  for (float v : u.pixels) {
    REQUIRE((v >= 0.0f && v <= 1.0f));
    mu += v;
  }
  for (float v : g.pixels) {
    REQUIRE((v >= 0.0f && v <= 1.0f));
    mg += v;
    at_edge += (v == 0.0f || v == 1.0f) ? 1 : 0;
  }
  CHECK(std::abs(mu / u.pixels.size() - 0.5) < 0.02);
  CHECK(std::abs(mg / g.pixels.size() - 0.5) < 0.02);
  // N(0.5, 0.5) puts about 32% of its mass outside [0, 1]
  CHECK(std::abs(static_cast<double>(at_edge) / g.pixels.size() - 0.3173) < 0.02);
  CHECK(generate_noise(NoiseKind::uniform, 50, 1, 16, 16, 4, 1).pixels == u.pixels);
}

TEST_CASE("ppm layout") {
  Tensor3<float> gray(1, 2, 2, {0.0f, 0.5f, 1.0f, 0.25f});
  Tensor3<float> color(3, 2, 2, {1, 1, 1, 1, 0, 0, 0, 0, 0.5f, 0.5f, 0.5f, 0.5f});
  const std::vector<Tensor3<float>> tiles{gray, gray};
  const auto b = encode_ppm_row(tiles);
  const std::string header = "P6\n4 2\n255\n";
  CHECK(std::string(b.begin(), b.begin() + static_cast<long>(header.size())) == header);
  CHECK(b.size() == header.size() + 4 * 2 * 3);
  CHECK(b[header.size() + 3] == 128);  // round(0.5 * 255)
  CHECK(b[header.size() + 4] == 128);
  const std::vector<Tensor3<float>> c{color};
  const auto cb = encode_ppm_row(c);
  CHECK(cb[11] == 255);
  CHECK(cb[12] == 0);
  CHECK(cb[13] == 128);
  const std::vector<Tensor3<float>> mixed{gray, color};
  CHECK_THROWS_AS(encode_ppm_row(mixed), dimension_error);
}

TEST_CASE("commands end to end") {
  TempDir tmp("commands");
  auto cfg = small_config(tmp.path);
  const auto data = cmd_gen_synth(cfg);
  CHECK(fs::exists(tmp.path / "gen-synth.effective.cfg"));
  cfg.set("train_data", data.train.string(), tmp.path);
  cfg.set("test_data", data.test.string(), tmp.path);

  SUBCASE("zero epochs writes the initial model and an empty log") {
    cfg.set("epochs", "0", tmp.path);
    const auto r = cmd_train(cfg);
    CHECK(slurp(r.log) == "epoch,clean,input,latent,feat,feat_prime,mean_loss,test_error,lr\n");
    model::Architecture a;
    a.channels = 4;
    model::ModelBundle<float> init(a, 3);
    CHECK(io::read_file(r.checkpoint) == model::encode_checkpoint(init, model::SgdState<float>(init.params())));
  }

  SUBCASE("training is reproducible, also from the echoed config") {
    const auto r1 = cmd_train(cfg);
    const auto log1 = slurp(r1.log);
    const auto ck1 = io::read_file(r1.checkpoint);
    const auto log_lines = lines(log1);
    REQUIRE(log_lines.size() == 3);
    const auto fields = split(log_lines[1]);
    REQUIRE(fields.size() == 9);
    int batches = 0;
    for (int k = 1; k <= 5; ++k) batches += std::stoi(fields[static_cast<std::size_t>(k)]);
    CHECK(batches == 4);

    RunConfig echoed;
    echoed.load_file(tmp.path / "train.effective.cfg");
    const auto r2 = cmd_train(echoed);
    CHECK(slurp(r2.log) == log1);
    CHECK(io::read_file(r2.checkpoint) == ck1);

    cfg.set("seed", "4", tmp.path);
    const auto r3 = cmd_train(cfg);
    CHECK(io::read_file(r3.checkpoint) != ck1);
  }

  SUBCASE("evaluation artifacts") {
    (void)cmd_train(cfg);
    const auto ev = cmd_eval(cfg);
    const auto j = nlohmann::json::parse(slurp(ev.report));
    for (const char* key : {"top1_error", "ece", "count", "ece_bins"}) {
      REQUIRE(j.contains(key));
      CHECK(std::isfinite(j[key].get<double>()));
    }
    CHECK(j["top1_error"].get<double>() == ev.top1_error);

    // ECE recomputed from the reliability CSV
    const auto rows = lines(slurp(ev.reliability));
    CHECK(rows[0] == "bin_lo,bin_hi,count,mean_conf,accuracy");
    double n = 0.0, weighted = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto f = split(rows[i]);
      const double c = std::stod(f[2]);
      n += c;
      weighted += c * std::abs(std::stod(f[4]) - std::stod(f[3]));
    }
    CHECK(rows.size() == 16);
    CHECK(n == 24.0);
    CHECK(weighted / n == doctest::Approx(j["ece"].get<double>()).epsilon(1e-12));

    const auto at = cmd_attack(cfg);
    REQUIRE(at.points.size() == 4);
    CHECK(at.points[0].epsilon == 0.0);
    CHECK(at.points[0].robust_error == at.clean_error);
    for (const auto& p : at.points) CHECK(p.max_perturbation <= p.epsilon + 1e-7);
    const auto aj = nlohmann::json::parse(slurp(at.report));
    CHECK(aj["results"].size() == 4);

    cfg.set("ood_source", "file", tmp.path);
    cfg.set("ood_data", data.test.string(), tmp.path);
    const auto same = cmd_ood(cfg);
    CHECK(same.metrics.auroc == 0.5);
    cfg.set("ood_source", "gaussian", tmp.path);
    const auto noise = cmd_ood(cfg);
    CHECK(noise.scores.ood_scores.size() == 24);
    CHECK(lines(slurp(noise.scores_csv)).size() == 49);
    const auto oj = nlohmann::json::parse(slurp(noise.report));
    CHECK(oj["threshold"].get<double>() == 0.5);

    const auto vis = cmd_visualize(cfg);
    CHECK(vis.tiles == 8);
    CHECK(vis.width == 8 * 16);
    CHECK(vis.height == 16);
    const auto ppm = io::read_file(vis.image);
    const std::string header = "P6\n128 16\n255\n";
    CHECK(std::string(ppm.begin(), ppm.begin() + static_cast<long>(header.size())) == header);
    CHECK(ppm.size() == header.size() + 128 * 16 * 3);
    // last tile is lambda = 1: the reconstruction of the first image
    const auto net = model::load_checkpoint(tmp.path / "checkpoint.amck").model;
    const auto test = load_dataset(data.test);
    const auto rec = net.reconstruct(test.image<float>(0));
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        CHECK(ppm[header.size() + (static_cast<std::size_t>(y) * 128 + 7 * 16 + x) * 3] == to_byte(rec.at(0, y, x)));

    cfg.set("decoder", "false", tmp.path);
    (void)cmd_train(cfg);
    CHECK_THROWS_AS(cmd_visualize(cfg), unsupported_error);
  }

  SUBCASE("incompatible data is rejected") {
    (void)cmd_train(cfg);
    SynthSpec spec;
    spec.classes = 3;
    spec.train_count = 4;
    spec.test_count = 4;
    save_dataset(tmp.path / "k3.amix", generate_synthetic(spec, 0).test);
    cfg.set("test_data", (tmp.path / "k3.amix").string(), tmp.path);
    CHECK_THROWS_AS(cmd_eval(cfg), dimension_error);
    cfg.set("train_data", (tmp.path / "k3.amix").string(), tmp.path);
    cfg.set("channels", "4", tmp.path);
  }
}

TEST_CASE("sinkhorn diagnostic") {
  TempDir tmp("check");
  RunConfig cfg;
  cfg.set("out", tmp.path.string(), tmp.path);
  cfg.set("check_trials", "10", tmp.path);
  const auto r = cmd_sinkhorn_check(cfg);
  CHECK(r.rows.size() == 40);
  const auto rows = lines(slurp(r.csv));
  CHECK(rows.size() == 41);
  CHECK(split(rows[0]).size() == 10);
  CHECK(lines(slurp(r.plans)).size() == 1 + 40 * 64);
  for (const auto& row : r.rows) CHECK(row.marginal_deviation <= 1e-6);
  for (int t = 0; t < 10; ++t)
    for (int e = 1; e < 4; ++e)
      CHECK(r.rows[static_cast<std::size_t>(t * 4 + e)].entropy >= r.rows[static_cast<std::size_t>(t * 4 + e - 1)].entropy - 1e-9);
  int within = 0;
  for (int t = 0; t < 10; ++t) within += std::abs(r.rows[static_cast<std::size_t>(t * 4)].relative_gap) < 0.01 ? 1 : 0;
  CHECK(within >= 9);
}
