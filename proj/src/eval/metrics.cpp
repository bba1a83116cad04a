#include "alignmix/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "alignmix/errors.hpp"

namespace alignmix::eval {

namespace {

struct Scored {
  double score;
  bool positive;
};

std::vector<Scored> ranked(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw parameter_error("ranking metrics need nonempty positive and negative sets");
  std::vector<Scored> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return all;
}

}  // namespace

PredictionRecord PredictionRecord::from_probabilities(std::vector<double> probabilities, int true_label) {
  if (probabilities.empty()) throw parameter_error("prediction record needs at least one class");
  PredictionRecord r;
  r.probabilities = std::move(probabilities);
  r.true_label = true_label;
  const auto it = std::max_element(r.probabilities.begin(), r.probabilities.end());
  r.predicted = static_cast<int>(it - r.probabilities.begin());
  r.confidence = *it;
  r.correct = r.predicted == true_label;
  return r;
}

double top1_error(std::span<const PredictionRecord> records) {
  if (records.empty()) throw parameter_error("top1_error: no records");
  std::size_t wrong = 0;
  for (const auto& r : records) wrong += r.correct ? 0 : 1;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(records.size());
}

CalibrationReport calibration(std::span<const PredictionRecord> records, int num_bins) {
  if (num_bins < 1) throw parameter_error("calibration: num_bins must be >= 1");
  if (records.empty()) throw parameter_error("calibration: no records");
  CalibrationReport rep;
  rep.bins.resize(static_cast<std::size_t>(num_bins));
  std::vector<double> conf_sum(rep.bins.size(), 0.0), correct(rep.bins.size(), 0.0);
  for (int b = 0; b < num_bins; ++b) {
    rep.bins[b].lo = static_cast<double>(b) / num_bins;
    rep.bins[b].hi = static_cast<double>(b + 1) / num_bins;
  }
  for (const auto& r : records) {
    int b = static_cast<int>(std::ceil(r.confidence * num_bins)) - 1;
    b = std::clamp(b, 0, num_bins - 1);
    ++rep.bins[b].count;
    conf_sum[b] += r.confidence;
    correct[b] += r.correct ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(records.size());
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    auto& bin = rep.bins[b];
    if (bin.count == 0) continue;
    bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
    bin.accuracy = correct[b] / static_cast<double>(bin.count);
    rep.ece += static_cast<double>(bin.count) / n * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return rep;
}

double expected_calibration_error(std::span<const PredictionRecord> records, int num_bins) {
  return calibration(records, num_bins).ece;
}

double auroc(std::span<const double> positive, std::span<const double> negative) {
  const auto all = ranked(positive, negative);
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  double tp = 0, fp = 0, area = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double prev_tpr = tp / np, prev_fpr = fp / nn;
    std::size_t j = i;
    for (; j < all.size() && all[j].score == all[i].score; ++j) (all[j].positive ? tp : fp) += 1.0;
    area += (fp / nn - prev_fpr) * (tp / np + prev_tpr) * 0.5;
    i = j;
  }
  return area;
}

double average_precision(std::span<const double> positive, std::span<const double> negative) {
  const auto all = ranked(positive, negative);
  const double np = static_cast<double>(positive.size());
  double tp = 0, fp = 0, ap = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double prev_recall = tp / np;
    std::size_t j = i;
    for (; j < all.size() && all[j].score == all[i].score; ++j) (all[j].positive ? tp : fp) += 1.0;
    ap += (tp / np - prev_recall) * (tp / (tp + fp));
    i = j;
  }
  return ap;
}

OODMetrics ood_metrics(const OODScoreSet& scores, double threshold) {
  if (scores.id_scores.empty() || scores.ood_scores.empty()) throw parameter_error("ood_metrics: empty score list");
  OODMetrics m;
  double id_hit = 0, ood_hit = 0;
  for (double s : scores.id_scores) id_hit += s >= threshold ? 1.0 : 0.0;
  for (double s : scores.ood_scores) ood_hit += s < threshold ? 1.0 : 0.0;
  m.det_acc = 0.5 * (id_hit / static_cast<double>(scores.id_scores.size()) +
                     ood_hit / static_cast<double>(scores.ood_scores.size()));
  m.auroc = auroc(scores.id_scores, scores.ood_scores);
  m.aupr_id = average_precision(scores.id_scores, scores.ood_scores);
  std::vector<double> neg_ood(scores.ood_scores.size()), neg_id(scores.id_scores.size());
  std::transform(scores.ood_scores.begin(), scores.ood_scores.end(), neg_ood.begin(), [](double s) { return -s; });
  std::transform(scores.id_scores.begin(), scores.id_scores.end(), neg_id.begin(), [](double s) { return -s; });
  m.aupr_ood = average_precision(neg_ood, neg_id);
  return m;
}

}  // namespace alignmix::eval
