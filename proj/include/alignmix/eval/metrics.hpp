#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alignmix::eval {

/// One classified example: softmax probabilities over the known classes.
struct PredictionRecord {
  std::vector<double> probabilities;
  int true_label = 0;
  int predicted = 0;      // argmax, lowest index on ties
  double confidence = 0;  // max probability
  bool correct = false;

  static PredictionRecord from_probabilities(std::vector<double> probabilities, int true_label);
};

/// Percentage of records whose argmax differs from the true label.
double top1_error(std::span<const PredictionRecord> records);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationReport {
  double ece = 0.0;  // in [0, 1]
  std::vector<CalibrationBin> bins;
};

/// Equal-width confidence bins (lo, hi] (confidence 0 falls in the first bin);
/// ECE = sum_b n_b / N * |acc_b - conf_b|.
CalibrationReport calibration(std::span<const PredictionRecord> records, int num_bins = 15);
double expected_calibration_error(std::span<const PredictionRecord> records, int num_bins = 15);

/// Max-softmax scores of in-distribution and out-of-distribution inputs.
struct OODScoreSet {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

struct OODMetrics {
  double det_acc = 0.0;
  double auroc = 0.0;
  double aupr_id = 0.0;
  double aupr_ood = 0.0;
};

inline constexpr double kDefaultOodThreshold = 0.5;

/// det_acc is balanced: mean of the ID rate at or above the threshold and the OOD
/// rate strictly below it. aupr_id ranks by score with ID positive; aupr_ood ranks by
/// negated score with OOD positive.
OODMetrics ood_metrics(const OODScoreSet& scores, double threshold = kDefaultOodThreshold);

/// Area under the ROC curve by trapezoidal integration over every distinct score
/// threshold; equals the fraction of concordant (positive, negative) pairs with ties
/// counted one half.
double auroc(std::span<const double> positive, std::span<const double> negative);

/// Step-wise area under the precision-recall curve, tied scores processed as one group.
double average_precision(std::span<const double> positive, std::span<const double> negative);

}  // namespace alignmix::eval
