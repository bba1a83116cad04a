#pragma once

// The CLI verbs as library calls. Each writes its artifacts into cfg.out_dir() and
// echoes the effective configuration there as <verb>.effective.cfg.
//
// Artifacts:
//   gen-synth       train.amix, test.amix
//   train           checkpoint.amck, train_log.csv
//                   (epoch,clean,input,latent,feat,feat_prime,mean_loss,test_error,lr)
//   eval            eval.json, reliability.csv (bin_lo,bin_hi,count,mean_conf,accuracy)
//   attack          attack.json
//   ood             ood.json, ood_scores.csv (set,score)
//   visualize       interpolation_<mode>.ppm
//   sinkhorn-check  sinkhorn_check.csv
//     (trial,epsilon,entropic_cost,exact_cost,relative_gap,marginal_deviation,entropy,iterations,log_domain,rounded)
//                   sinkhorn_plans.csv (trial,epsilon,i,j,cost,plan)

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "alignmix/cli/config.hpp"
#include "alignmix/eval/metrics.hpp"
#include "alignmix/model/trainer.hpp"

namespace alignmix::cli {

namespace fs = std::filesystem;

struct GenSynthResult {
  fs::path train;
  fs::path test;
};
GenSynthResult cmd_gen_synth(const RunConfig& cfg);

struct EpochRecord {
  model::EpochStats stats;
  double test_error = 0.0;  // percent; NaN without test data
};

struct TrainResult {
  fs::path checkpoint;
  fs::path log;
  std::vector<EpochRecord> epochs;
  double final_test_error = 0.0;  // percent; NaN without test data
};
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainResult cmd_train(const RunConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
  double top1_error = 0.0;
  eval::CalibrationReport calibration;
  fs::path report;
  fs::path reliability;
};
EvalResult cmd_eval(const RunConfig& cfg);

struct AttackPoint {
  double epsilon = 0.0;
  double step_size = 0.0;
  double robust_error = 0.0;
  double max_perturbation = 0.0;
};
struct AttackResult {
  std::string attack;
  double clean_error = 0.0;
  std::vector<AttackPoint> points;
  fs::path report;
};
AttackResult cmd_attack(const RunConfig& cfg);

struct OodResult {
  eval::OODMetrics metrics;
  eval::OODScoreSet scores;
  fs::path report;
  fs::path scores_csv;
};
OodResult cmd_ood(const RunConfig& cfg);

struct VisualizeResult {
  fs::path image;
  int width = 0;
  int height = 0;
  int tiles = 0;
};
VisualizeResult cmd_visualize(const RunConfig& cfg);

struct SinkhornCheckRow {
  int trial = 0;
  double epsilon = 0.0;
  double entropic_cost = 0.0;
  double exact_cost = 0.0;
  double relative_gap = 0.0;
  double marginal_deviation = 0.0;
  double entropy = 0.0;
  int iterations = 0;
  bool log_domain = false;
  bool rounded = false;
};
struct SinkhornCheckResult {
  std::vector<SinkhornCheckRow> rows;
  fs::path csv;
  fs::path plans;
};
SinkhornCheckResult cmd_sinkhorn_check(const RunConfig& cfg);


}  // namespace alignmix::cli
