#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sevmil {

// Asymmetric wheel weights: entries(predicted, true) =
// 1 + |predicted - true| + P * [prediction strictly less urgent than truth].
struct ConfusionWeightMatrix {
  Index level = 0;
  MatrixX entries;
  double penalty = 2.0;
};

// counts(true, predicted).
struct ConfusionMatrix {
  Index level = 0;
  CountMatrix counts;

  ConfusionMatrix() = default;
  ConfusionMatrix(Index level_index, Index classes)
      : level(level_index), counts(CountMatrix::Zero(classes, classes)) {}

  Index classes() const { return counts.rows(); }
  std::int64_t total() const { return counts.sum(); }
  std::int64_t misclassified() const { return total() - counts.trace(); }
};

// How a count cell (true t, pred p) is paired with the weight matrix.
// kSampleAligned pairs it with entries(p, t), which maximally penalizes the
// under-diagnosis direction; kTransposed pairs it with entries(t, p) and
// exists for auditing score variants that mix the two index orders.
enum class WeightPairing { kSampleAligned, kTransposed };

// Factor applied to severe-error terms of the risk statistic: halving is
// the default; the doubling variant treats severity as an up-weight.
enum class RiskSevereFactor { kHalveSevere, kDoubleSevere };

ConfusionWeightMatrix build_confusion_weights(const Hierarchy& h, Index level,
                                              double penalty = 2.0);

// Severity-weighted confidence over all samples, in (0, 1]; exactly 1 when
// every prediction is correct.
double ascc(const ConfusionMatrix& cm, const ConfusionWeightMatrix& w,
            WeightPairing pairing = WeightPairing::kSampleAligned);

// Severity-weighted confidence over misclassified samples only; nullopt
// (reported as "inf") when there are no misclassifications.
std::optional<double> asmc(const ConfusionMatrix& cm,
                           const ConfusionWeightMatrix& w,
                           WeightPairing pairing = WeightPairing::kSampleAligned);

// Expected risk over misclassified samples:
// (1 / #errors) * sum over all cells of factor^[severe] * count * weight.
double expected_risk(const ConfusionMatrix& cm, const ConfusionWeightMatrix& w,
                     const Hierarchy& h, Index level,
                     RiskSevereFactor factor = RiskSevereFactor::kHalveSevere);

// Mean over samples of true class `class_c` that were misclassified of the
// expected predicted class index, with classes numbered 1..C; nullopt when
// the class has no misclassified samples.
std::optional<double> expected_error_class(
    const std::vector<VectorX>& per_sample_probs,
    const std::vector<Index>& true_labels,
    const std::vector<Index>& predicted_labels, Index class_c);

void accumulate(ConfusionMatrix& cm, Index true_class, Index predicted);

// Cellwise sum, for parallel evaluation shards.
ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

double accuracy(const ConfusionMatrix& cm);

std::int64_t severe_error_count(const ConfusionMatrix& cm, const Hierarchy& h,
                                Index level);

// One-vs-rest macro AUC via rank statistics (ties get averaged ranks).
// Classes without both positives and negatives are skipped; nullopt when no
// class is scorable.
std::optional<double> auc_macro_ovr(const std::vector<VectorX>& per_sample_probs,
                                    const std::vector<Index>& true_labels);

struct MetricReport {
  Index level = 0;
  double accuracy = 0.0;
  std::optional<double> auc;
  double ascc = 0.0;
  std::optional<double> asmc;           // nullopt serialized as "inf"
  std::optional<double> expected_risk;  // nullopt when no misclassification
  std::int64_t severe_errors = 0;
  std::vector<std::optional<double>> expected_error_class;  // per class
};

// Metrics derivable from a confusion matrix alone (auc and
// expected_error_class stay empty).
MetricReport report_from_confusion(const ConfusionMatrix& cm,
                                   const Hierarchy& h, double penalty,
                                   RiskSevereFactor factor =
                                       RiskSevereFactor::kHalveSevere);

}  // namespace sevmil
