#include "sevmil/metrics.hpp"

#include "sevmil/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sevmil {
namespace {

double cell_weight(const ConfusionWeightMatrix& w, Index true_class,
                   Index predicted, WeightPairing pairing) {
  return pairing == WeightPairing::kSampleAligned
             ? w.entries(predicted, true_class)
             : w.entries(true_class, predicted);
}

void check_shapes(const ConfusionMatrix& cm, const ConfusionWeightMatrix& w) {
  require(cm.counts.rows() == cm.counts.cols(), ErrorCode::kPrecondition,
          "confusion matrix must be square");
  require(w.entries.rows() == cm.counts.rows() &&
              w.entries.cols() == cm.counts.cols(),
          ErrorCode::kPrecondition,
          "weight matrix does not match confusion matrix");
}

}  // namespace

ConfusionWeightMatrix build_confusion_weights(const Hierarchy& h, Index level,
                                              double penalty) {
  require(penalty >= 0.0, ErrorCode::kPrecondition, "penalty must be >= 0");
  const Index c = h.num_classes(level);
  ConfusionWeightMatrix w;
  w.level = level;
  w.penalty = penalty;
  w.entries = MatrixX(c, c);
  for (Index pred = 0; pred < c; ++pred) {
    for (Index truth = 0; truth < c; ++truth) {
      w.entries(pred, truth) =
          1.0 + static_cast<double>(std::abs(pred - truth)) +
          (is_severe(h, level, pred, truth) ? penalty : 0.0);
    }
  }
  return w;
}

double ascc(const ConfusionMatrix& cm, const ConfusionWeightMatrix& w,
            WeightPairing pairing) {
  check_shapes(cm, w);
  const std::int64_t total = cm.total();
  require(total > 0, ErrorCode::kPrecondition, "empty confusion matrix");
  double sum = 0.0;
  for (Index t = 0; t < cm.classes(); ++t)
    for (Index p = 0; p < cm.classes(); ++p)
      if (cm.counts(t, p) != 0)
        sum += static_cast<double>(cm.counts(t, p)) /
               cell_weight(w, t, p, pairing);
  return sum / static_cast<double>(total);
}

std::optional<double> asmc(const ConfusionMatrix& cm,
                           const ConfusionWeightMatrix& w,
                           WeightPairing pairing) {
  check_shapes(cm, w);
  const std::int64_t errors = cm.misclassified();
  if (errors == 0) return std::nullopt;
  double sum = 0.0;
  for (Index t = 0; t < cm.classes(); ++t)
    for (Index p = 0; p < cm.classes(); ++p)
      if (t != p && cm.counts(t, p) != 0)
        sum += static_cast<double>(cm.counts(t, p)) /
               (cell_weight(w, t, p, pairing) - 1.0);
  return sum / static_cast<double>(errors);
}

double expected_risk(const ConfusionMatrix& cm, const ConfusionWeightMatrix& w,
                     const Hierarchy& h, Index level, RiskSevereFactor factor) {
  check_shapes(cm, w);
  const std::int64_t errors = cm.misclassified();
  require(errors > 0, ErrorCode::kPrecondition,
          "expected_risk needs at least one misclassification");
  const double severe_factor =
      factor == RiskSevereFactor::kHalveSevere ? 0.5 : 2.0;
  double sum = 0.0;
  for (Index t = 0; t < cm.classes(); ++t) {
    for (Index p = 0; p < cm.classes(); ++p) {
      if (cm.counts(t, p) == 0) continue;
      const double f = is_severe(h, level, p, t) ? severe_factor : 1.0;
      sum += f * static_cast<double>(cm.counts(t, p)) * w.entries(p, t);
    }
  }
  return sum / static_cast<double>(errors);
}

std::optional<double> expected_error_class(
    const std::vector<VectorX>& per_sample_probs,
    const std::vector<Index>& true_labels,
    const std::vector<Index>& predicted_labels, Index class_c) {
  require(per_sample_probs.size() == true_labels.size() &&
              per_sample_probs.size() == predicted_labels.size(),
          ErrorCode::kPrecondition, "per-sample input size mismatch");
  require(per_sample_probs.empty() || per_sample_probs.front().size() >= 2,
          ErrorCode::kPrecondition, "need at least 2 classes");
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < per_sample_probs.size(); ++i) {
    if (true_labels[i] != class_c || predicted_labels[i] == class_c) continue;
    const VectorX& p = per_sample_probs[i];
    double expectation = 0.0;
    for (Index k = 0; k < p.size(); ++k)
      expectation += static_cast<double>(k + 1) * p[k];  // classes 1..C
    sum += expectation;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

void accumulate(ConfusionMatrix& cm, Index true_class, Index predicted) {
  require(true_class >= 0 && true_class < cm.classes() && predicted >= 0 &&
              predicted < cm.classes(),
          ErrorCode::kPrecondition, "class index out of range");
  ++cm.counts(true_class, predicted);
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  require(a.level == b.level && a.classes() == b.classes(),
          ErrorCode::kPrecondition, "cannot merge mismatched matrices");
  ConfusionMatrix out = a;
  out.counts += b.counts;
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  require(total > 0, ErrorCode::kPrecondition, "empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

std::int64_t severe_error_count(const ConfusionMatrix& cm, const Hierarchy& h,
                                Index level) {
  std::int64_t count = 0;
  for (Index t = 0; t < cm.classes(); ++t)
    for (Index p = 0; p < cm.classes(); ++p)
      if (is_severe(h, level, p, t)) count += cm.counts(t, p);
  return count;
}

std::optional<double> auc_macro_ovr(const std::vector<VectorX>& per_sample_probs,
                                    const std::vector<Index>& true_labels) {
  require(per_sample_probs.size() == true_labels.size(),
          ErrorCode::kPrecondition, "per-sample input size mismatch");
  if (per_sample_probs.empty()) return std::nullopt;
  const Index classes = per_sample_probs.front().size();
  const std::size_t n = per_sample_probs.size();

  double sum = 0.0;
  int usable = 0;
  std::vector<std::size_t> order(n);
  std::vector<double> rank(n);
  for (Index c = 0; c < classes; ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (true_labels[i] == c) ++positives;
    if (positives == 0 || positives == n) continue;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return per_sample_probs[a][c] < per_sample_probs[b][c];
    });
    // averaged ranks over score ties
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && per_sample_probs[order[j + 1]][c] ==
                              per_sample_probs[order[i]][c])
        ++j;
      const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mean_rank;
      i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (true_labels[i] == c) rank_sum += rank[i];
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(n - positives);
    sum += (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
    ++usable;
  }
  if (usable == 0) return std::nullopt;
  return sum / usable;
}

MetricReport report_from_confusion(const ConfusionMatrix& cm,
                                   const Hierarchy& h, double penalty,
                                   RiskSevereFactor factor) {
  const ConfusionWeightMatrix w = build_confusion_weights(h, cm.level, penalty);
  MetricReport report;
  report.level = cm.level;
  report.accuracy = accuracy(cm);
  report.ascc = ascc(cm, w);
  report.asmc = asmc(cm, w);
  if (cm.misclassified() > 0)
    report.expected_risk = expected_risk(cm, w, h, cm.level, factor);
  report.severe_errors = severe_error_count(cm, h, cm.level);
  report.expected_error_class.assign(static_cast<std::size_t>(cm.classes()),
                                     std::nullopt);
  return report;
}

}  // namespace sevmil
