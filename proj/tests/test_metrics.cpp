#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "alignmix/errors.hpp"
#include "alignmix/eval/metrics.hpp"

using namespace alignmix;
using namespace alignmix::eval;

namespace {

PredictionRecord record(double conf, bool correct) {
  // two classes; class 0 carries the confidence
  auto r = PredictionRecord::from_probabilities({conf, 1.0 - conf}, correct ? 0 : 1);
  return r;
}

// Fraction of concordant (positive, negative) pairs, ties counted one half.
double pairwise_auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0.0;
  for (double p : pos)
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return s / (static_cast<double>(pos.size()) * neg.size());
}

// Step-wise average precision by brute force: for each distinct threshold t (descending),
// precision and recall of {score >= t}; AP = sum (R_t - R_prev) * P_t.
double brute_ap(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> th(pos);
  th.insert(th.end(), neg.begin(), neg.end());
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  double ap = 0.0, prev_recall = 0.0;
  for (double t : th) {
    const double tp = static_cast<double>(std::count_if(pos.begin(), pos.end(), [&](double v) { return v >= t; }));
    const double fp = static_cast<double>(std::count_if(neg.begin(), neg.end(), [&](double v) { return v >= t; }));
    const double recall = tp / pos.size();
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

}  // namespace

TEST_CASE("top-1 error") {
  std::vector<PredictionRecord> all{record(0.9, true), record(0.8, true), record(0.7, true), record(0.6, true)};
  CHECK(top1_error(all) == 0.0);
  all[2] = record(0.7, false);
  CHECK(top1_error(all) == 25.0);
  CHECK_THROWS_AS(top1_error(std::vector<PredictionRecord>{}), parameter_error);
  const auto tie = PredictionRecord::from_probabilities({0.5, 0.5}, 1);
  CHECK(tie.predicted == 0);
  CHECK_FALSE(tie.correct);
}

TEST_CASE("calibration") {
  const std::vector<PredictionRecord> perfect{record(1.0, true), record(1.0, true)};
  CHECK(expected_calibration_error(perfect, 15) == 0.0);

  const std::vector<PredictionRecord> hand{record(0.9, true), record(0.9, false)};
  CHECK(expected_calibration_error(hand, 10) == 0.4);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  std::vector<PredictionRecord> rs;
  double acc = 0.0, conf = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double c = u(rng);
    const bool ok = (rng() & 1) != 0;
    rs.push_back(record(c, ok));
    acc += ok;
    conf += c;
  }
  const double e = expected_calibration_error(rs, 15);
  CHECK(e >= 0.0);
  CHECK(e <= 1.0);
  CHECK(expected_calibration_error(rs, 1) == doctest::Approx(std::abs(acc / 200 - conf / 200)).epsilon(1e-12));
  auto shuffled = rs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(expected_calibration_error(shuffled, 15) == doctest::Approx(e).epsilon(1e-12));

  const auto rep = calibration(rs, 15);
  CHECK(rep.bins.size() == 15);
  std::size_t total = 0;
  for (const auto& b : rep.bins) total += b.count;
  CHECK(total == rs.size());
  CHECK_THROWS_AS(calibration(rs, 0), parameter_error);
}

TEST_CASE("ood metrics: hand cases") {
  const auto perfect = ood_metrics({{0.9, 0.9, 0.9}, {0.1, 0.1}}, 0.5);
  CHECK(perfect.det_acc == 1.0);
  CHECK(perfect.auroc == 1.0);
  CHECK(perfect.aupr_id == 1.0);
  CHECK(perfect.aupr_ood == 1.0);

  const std::vector<double> id{0.8, 0.4}, ood{0.6, 0.2};
  CHECK(auroc(id, ood) == 0.75);
  const std::vector<double> same{0.3, 0.5, 0.5, 0.9};
  CHECK(auroc(same, same) == 0.5);

  const auto at_zero = ood_metrics({{0.2, 0.7}, {0.1, 0.6}}, 0.0);
  CHECK(at_zero.det_acc == 0.5);
  const auto tie = ood_metrics({{0.5}, {0.5}}, 0.5);
  CHECK(tie.det_acc == 0.5);  // ID at the threshold counts as ID, OOD at the threshold is missed
  CHECK(kDefaultOodThreshold == 0.5);
  CHECK_THROWS_AS(ood_metrics({{}, {0.1}}), parameter_error);
}

TEST_CASE("ranking metrics agree with brute force") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_int_distribution<int> grid(0, 20);  // coarse grid forces ties
  for (int t = 0; t < 100; ++t) {
    std::vector<double> pos(static_cast<std::size_t>(size(rng))), neg(static_cast<std::size_t>(size(rng)));
    for (auto& v : pos) v = grid(rng) / 20.0;
    for (auto& v : neg) v = grid(rng) / 20.0;
    CHECK(std::abs(auroc(pos, neg) - pairwise_auroc(pos, neg)) < 1e-12);
    CHECK(std::abs(average_precision(pos, neg) - brute_ap(pos, neg)) < 1e-12);

    // strictly monotone transform leaves AuROC unchanged
    std::vector<double> tp(pos), tn(neg);
    for (auto& v : tp) v = std::exp(3.0 * v) - 7.0;
    for (auto& v : tn) v = std::exp(3.0 * v) - 7.0;
    CHECK(std::abs(auroc(tp, tn) - auroc(pos, neg)) < 1e-12);

    // OOD-positive orientation is the ID-positive computation on negated, swapped sets
    std::vector<double> np(neg), nn(pos);
    for (auto& v : np) v = -v;
    for (auto& v : nn) v = -v;
    const auto m = ood_metrics({pos, neg}, 0.5);
    CHECK(m.aupr_ood == doctest::Approx(brute_ap(np, nn)).epsilon(1e-12));
    CHECK(m.aupr_id == doctest::Approx(brute_ap(pos, neg)).epsilon(1e-12));
  }
}
