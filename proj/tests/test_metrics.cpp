#include "sevmil/metrics.hpp"

#include "sevmil/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <tuple>

namespace sevmil {
namespace {

using testing::Rational;
using testing::single_level_chain;

ConfusionMatrix matrix_with(Index classes,
                            const std::vector<std::tuple<Index, Index, long>>&
                                cells) {
  ConfusionMatrix cm(0, classes);
  for (const auto& [t, p, count] : cells) cm.counts(t, p) = count;
  return cm;
}

TEST(ConfusionWeights, ThreeClassChainPenaltyTwo) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  EXPECT_DOUBLE_EQ(w.entries(0, 2), 5.0);  // under-diagnosis by 2 steps
  EXPECT_DOUBLE_EQ(w.entries(2, 0), 3.0);  // over-diagnosis by 2 steps
  EXPECT_DOUBLE_EQ(w.entries(1, 1), 1.0);
}

TEST(ConfusionWeights, ZeroPenaltyIsSymmetric) {
  const auto w = build_confusion_weights(single_level_chain(4), 0, 0.0);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(w.entries(i, j), 1.0 + std::abs(i - j));
}

TEST(ConfusionWeights, EquivalentClassesGetNoPenalty) {
  Hierarchy h;
  h.class_names = {{"a", "b", "c"}};
  h.parent_of.resize(1);
  h.priority.emplace_back(3);
  h.priority[0].set(0, 1, Relation::kEquivalent);
  h.priority[0].set(1, 2, Relation::kEquivalent);
  close_priority(h);
  ASSERT_TRUE(validate(h).ok());
  const auto w = build_confusion_weights(h, 0, 2.0);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      EXPECT_DOUBLE_EQ(w.entries(i, j), 1.0 + std::abs(i - j));
}

TEST(ConfusionWeights, AsymmetricWhenOneDirectionIsSevere) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      if (i != j) EXPECT_NE(w.entries(i, j), w.entries(j, i));
}

TEST(Ascc, AllCorrectIsOne) {
  const Hierarchy h = single_level_chain(3);
  const auto w = build_confusion_weights(h, 0, 2.0);
  const auto cm = matrix_with(3, {{0, 0, 3}, {1, 1, 2}, {2, 2, 5}});
  EXPECT_DOUBLE_EQ(ascc(cm, w), 1.0);
}

TEST(Ascc, SingleSevereErrorWorkedExample) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{2, 0, 1}});
  EXPECT_DOUBLE_EQ(ascc(cm, w), 0.2);
}

TEST(Ascc, TwoSampleWorkedExample) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{1, 1, 1}, {0, 2, 1}});
  EXPECT_NEAR(ascc(cm, w), 2.0 / 3.0, 1e-15);
}

TEST(Ascc, EmptyMatrixThrows) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  EXPECT_THROW(ascc(ConfusionMatrix(0, 3), w), Error);
}

TEST(Asmc, AdjacentOverDiagnosisScoresOne) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{0, 1, 1}});
  ASSERT_TRUE(asmc(cm, w).has_value());
  EXPECT_DOUBLE_EQ(*asmc(cm, w), 1.0);
}

TEST(Asmc, WorstThreeClassMistake) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{2, 0, 1}});
  EXPECT_DOUBLE_EQ(*asmc(cm, w), 0.25);
}

TEST(Asmc, UndefinedWithoutMistakes) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{0, 0, 4}});
  EXPECT_FALSE(asmc(cm, w).has_value());
}

TEST(ExpectedRisk, SingleAdjacentMistake) {
  const Hierarchy h = single_level_chain(3);
  const auto w = build_confusion_weights(h, 0, 2.0);
  // true=0 predicted=1 is over-diagnosis: weight 2, no severe factor.
  const auto cm = matrix_with(3, {{0, 1, 1}});
  EXPECT_DOUBLE_EQ(expected_risk(cm, w, h, 0), 2.0);
}

TEST(ExpectedRisk, SymmetricWeightsSameResult) {
  const Hierarchy h = single_level_chain(3);
  const auto w = build_confusion_weights(h, 0, 0.0);
  const auto cm = matrix_with(3, {{0, 1, 1}});
  EXPECT_DOUBLE_EQ(expected_risk(cm, w, h, 0), 2.0);
}

TEST(ExpectedRisk, DoubledFactorOnSevereMistake) {
  const Hierarchy h = single_level_chain(3);
  const auto w = build_confusion_weights(h, 0, 2.0);
  const auto cm = matrix_with(3, {{2, 0, 1}});
  EXPECT_DOUBLE_EQ(
      expected_risk(cm, w, h, 0, RiskSevereFactor::kDoubleSevere), 10.0);
  EXPECT_DOUBLE_EQ(expected_risk(cm, w, h, 0), 2.5);  // default 0.5 factor
}

TEST(ExpectedRisk, NoMisclassificationThrows) {
  const Hierarchy h = single_level_chain(3);
  const auto w = build_confusion_weights(h, 0, 2.0);
  EXPECT_THROW(expected_risk(matrix_with(3, {{1, 1, 2}}), w, h, 0), Error);
}

TEST(ExpectedErrorClass, UniformGivesMidpoint) {
  const std::vector<VectorX> probs(4, VectorX::Constant(10, 0.1));
  const std::vector<Index> truth = {3, 3, 3, 3};
  const std::vector<Index> preds = {1, 2, 4, 5};  // all wrong
  EXPECT_NEAR(*expected_error_class(probs, truth, preds, 3), 5.5, 1e-12);
}

TEST(ExpectedErrorClass, OneHotGivesItsIndex) {
  VectorX p = VectorX::Zero(5);
  p[2] = 1.0;  // class 3 in 1-based numbering
  EXPECT_DOUBLE_EQ(*expected_error_class({p}, {0}, {2}, 0), 3.0);
}

TEST(ExpectedErrorClass, TwoSampleAverage) {
  VectorX a(3), b(3);
  a << 0.5, 0.5, 0.0;
  b << 0.0, 0.5, 0.5;
  const auto value = expected_error_class({a, b}, {0, 0}, {1, 2}, 0);
  EXPECT_NEAR(*value, 2.0, 1e-12);  // mean of 1.5 and 2.5
}

TEST(ExpectedErrorClass, UndefinedWithoutErrorsOfThatClass) {
  const std::vector<VectorX> probs = {VectorX::Constant(3, 1.0 / 3)};
  EXPECT_FALSE(expected_error_class(probs, {1}, {1}, 1).has_value());
}

TEST(Accumulate, CountsAndConservation) {
  ConfusionMatrix cm(0, 3);
  accumulate(cm, 0, 0);
  EXPECT_EQ(cm.counts(0, 0), 1);

  Rng rng(31);
  std::vector<std::pair<Index, Index>> stream;
  for (int i = 0; i < 40; ++i)
    stream.emplace_back(rng.next_int(0, 2), rng.next_int(0, 2));
  ConfusionMatrix forward_order(0, 3), reverse_order(0, 3);
  for (const auto& [t, p] : stream) accumulate(forward_order, t, p);
  for (auto it = stream.rbegin(); it != stream.rend(); ++it)
    accumulate(reverse_order, it->first, it->second);
  EXPECT_EQ(forward_order.counts, reverse_order.counts);
  EXPECT_EQ(forward_order.total(), 40);
}

TEST(Accumulate, OutOfRangeThrows) {
  ConfusionMatrix cm(0, 3);
  EXPECT_THROW(accumulate(cm, 3, 0), Error);
}

TEST(Merge, CellwiseAddition) {
  const auto a = matrix_with(3, {{0, 1, 2}});
  const auto b = matrix_with(3, {{0, 1, 1}, {2, 2, 4}});
  const auto m = merge(a, b);
  EXPECT_EQ(m.counts(0, 1), 3);
  EXPECT_EQ(m.counts(2, 2), 4);
}

// --- exact rational reference evaluators -----------------------------------

struct RationalMetrics {
  Rational ascc;
  bool asmc_defined = false;
  Rational asmc;
  bool risk_defined = false;
  Rational risk;
};

// Naive double-loop transliteration of the three formulas with exact
// integer/rational arithmetic. Weights are W = 1 + |i-j| + P*severe with
// integer P.
RationalMetrics reference_metrics(const ConfusionMatrix& cm, const Hierarchy& h,
                                  long penalty, bool doubled_risk_factor) {
  RationalMetrics out;
  const Index c = cm.classes();
  long long total = 0, errors = 0;
  for (Index t = 0; t < c; ++t)
    for (Index p = 0; p < c; ++p) {
      total += cm.counts(t, p);
      if (t != p) errors += cm.counts(t, p);
    }

  Rational ascc_sum{0, 1}, asmc_sum{0, 1}, risk_sum{0, 1};
  for (Index t = 0; t < c; ++t) {
    for (Index p = 0; p < c; ++p) {
      const long long count = cm.counts(t, p);
      if (count == 0) continue;
      const bool severe = is_severe(h, 0, p, t);
      const long long weight =
          1 + std::abs(static_cast<long long>(p) - static_cast<long long>(t)) +
          (severe ? penalty : 0);
      ascc_sum = ascc_sum + Rational{count, weight};
      if (t != p) asmc_sum = asmc_sum + Rational{count, weight - 1};
      Rational term{count * weight, 1};
      if (severe)
        term = term * (doubled_risk_factor ? Rational{2, 1} : Rational{1, 2});
      risk_sum = risk_sum + term;
    }
  }
  if (total > 0) out.ascc = ascc_sum * Rational{1, total};
  if (errors > 0) {
    out.asmc_defined = true;
    out.asmc = asmc_sum * Rational{1, errors};
    out.risk_defined = true;
    out.risk = risk_sum * Rational{1, errors};
  }
  return out;
}

// Enumerates every `classes`-class confusion matrix with total count at most
// `max_total` and checks the module against the rational reference.
void exhaustive_against_reference(Index classes, long max_total) {
  const Hierarchy h = single_level_chain(classes);
  const auto w2 = build_confusion_weights(h, 0, 2.0);

  ConfusionMatrix cm(0, classes);
  const Index cells = classes * classes;
  long checked = 0;

  std::function<void(Index, long)> fill = [&](Index cell, long remaining) {
    if (cell == cells) {
      if (cm.total() == 0) return;
      const RationalMetrics ref = reference_metrics(cm, h, 2, false);
      ASSERT_NEAR(ascc(cm, w2), ref.ascc.value(), 1e-12);
      const auto module_asmc = asmc(cm, w2);
      ASSERT_EQ(module_asmc.has_value(), ref.asmc_defined);
      if (ref.asmc_defined)
        ASSERT_NEAR(*module_asmc, ref.asmc.value(), 1e-12);
      if (ref.risk_defined) {
        ASSERT_NEAR(expected_risk(cm, w2, h, 0), ref.risk.value(), 1e-12);
        const RationalMetrics doubled = reference_metrics(cm, h, 2, true);
        ASSERT_NEAR(
            expected_risk(cm, w2, h, 0, RiskSevereFactor::kDoubleSevere),
            doubled.risk.value(), 1e-12);
      }
      ++checked;
      return;
    }
    for (long count = 0; count <= remaining; ++count) {
      cm.counts(cell / classes, cell % classes) = count;
      fill(cell + 1, remaining - count);
    }
    cm.counts(cell / classes, cell % classes) = 0;
  };
  fill(0, max_total);
  EXPECT_GT(checked, 0);
}

TEST(BruteForceOracle, ThreeClassesUpToTotalFour) {
  exhaustive_against_reference(3, 4);
}

// --- the dummy-scenario discrimination property ----------------------------

struct Signature {
  long long total;
  long long trace;
  std::vector<Index> distances;  // sorted |i-j| multiset of the errors

  bool operator<(const Signature& other) const {
    return std::tie(total, trace, distances) <
           std::tie(other.total, other.trace, other.distances);
  }
};

// Brute-force search for two matrices with identical accuracy and identical
// symmetric severity but different severe-direction error counts. Returns
// the first such pair in enumeration order.
bool find_discriminating_pair(Index classes, long max_total, ConfusionMatrix* a,
                              ConfusionMatrix* b) {
  const Hierarchy h = single_level_chain(classes);
  std::map<std::pair<Signature, std::int64_t>, ConfusionMatrix> seen;
  ConfusionMatrix cm(0, classes);
  const Index cells = classes * classes;
  bool found = false;

  std::function<void(Index, long)> fill = [&](Index cell, long remaining) {
    if (found) return;
    if (cell == cells) {
      if (cm.misclassified() == 0 || cm.counts.trace() == 0) return;
      Signature sig{cm.total(), cm.counts.trace(), {}};
      for (Index t = 0; t < classes; ++t)
        for (Index p = 0; p < classes; ++p)
          if (t != p)
            for (long k = 0; k < cm.counts(t, p); ++k)
              sig.distances.push_back(std::abs(t - p));
      std::sort(sig.distances.begin(), sig.distances.end());
      const std::int64_t severe = severe_error_count(cm, h, 0);
      for (const auto& [key, other] : seen) {
        if (key.first < sig || sig < key.first) continue;
        if (key.second != severe) {
          *a = other;
          *b = cm;
          found = true;
          return;
        }
      }
      seen.emplace(std::make_pair(sig, severe), cm);
      return;
    }
    for (long count = 0; count <= remaining && !found; ++count) {
      cm.counts(cell / classes, cell % classes) = count;
      fill(cell + 1, remaining - count);
    }
    cm.counts(cell / classes, cell % classes) = 0;
  };
  fill(0, max_total);
  return found;
}

TEST(Discrimination, AsymmetrySeparatesEqualAccuracyModels) {
  ConfusionMatrix model_a(0, 5), model_b(0, 5);
  ASSERT_TRUE(find_discriminating_pair(5, 2, &model_a, &model_b));

  const Hierarchy h = single_level_chain(5);
  const auto w0 = build_confusion_weights(h, 0, 0.0);
  const auto w2 = build_confusion_weights(h, 0, 2.0);

  EXPECT_DOUBLE_EQ(accuracy(model_a), accuracy(model_b));
  EXPECT_DOUBLE_EQ(ascc(model_a, w0), ascc(model_b, w0));
  EXPECT_DOUBLE_EQ(*asmc(model_a, w0), *asmc(model_b, w0));

  EXPECT_GE(std::abs(ascc(model_a, w2) - ascc(model_b, w2)), 0.01);
  EXPECT_GE(std::abs(*asmc(model_a, w2) - *asmc(model_b, w2)), 0.01);
}

// --- remaining spec properties ---------------------------------------------

TEST(Properties, AsccAlwaysInUnitInterval) {
  Rng rng(33);
  const Hierarchy h = single_level_chain(5);
  const auto w = build_confusion_weights(h, 0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm(0, 5);
    for (int k = 0; k < 12; ++k)
      accumulate(cm, rng.next_int(0, 4), rng.next_int(0, 4));
    const double value = ascc(cm, w);
    EXPECT_GT(value, 0.0);
    EXPECT_LE(value, 1.0);
    EXPECT_EQ(value == 1.0, cm.misclassified() == 0);
  }
}

TEST(Properties, AsmcIsOneWithOnlyAdjacentErrorsAtZeroPenalty) {
  const Hierarchy h = single_level_chain(5);
  const auto w = build_confusion_weights(h, 0, 0.0);
  const auto cm = matrix_with(5, {{0, 1, 3}, {3, 2, 2}, {4, 3, 1}, {1, 1, 9}});
  EXPECT_DOUBLE_EQ(*asmc(cm, w), 1.0);
}

TEST(Properties, MovingAnErrorToALighterCellImprovesBothScores) {
  Rng rng(34);
  const Hierarchy h = single_level_chain(5);
  const auto w = build_confusion_weights(h, 0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    ConfusionMatrix cm(0, 5);
    for (int k = 0; k < 10; ++k)
      accumulate(cm, rng.next_int(0, 4), rng.next_int(0, 4));
    // pick an occupied error cell and a strictly lighter error cell
    Index from_t = -1, from_p = -1, to_t = -1, to_p = -1;
    for (Index t = 0; t < 5 && from_t < 0; ++t)
      for (Index p = 0; p < 5 && from_t < 0; ++p)
        if (t != p && cm.counts(t, p) > 0) {
          from_t = t;
          from_p = p;
        }
    if (from_t < 0) continue;
    for (Index t = 0; t < 5 && to_t < 0; ++t)
      for (Index p = 0; p < 5 && to_t < 0; ++p)
        if (t != p && w.entries(p, t) < w.entries(from_p, from_t)) {
          to_t = t;
          to_p = p;
        }
    if (to_t < 0) continue;

    ConfusionMatrix moved = cm;
    --moved.counts(from_t, from_p);
    ++moved.counts(to_t, to_p);
    EXPECT_GT(ascc(moved, w), ascc(cm, w));
    EXPECT_GT(*asmc(moved, w), *asmc(cm, w));
  }
}

TEST(Properties, AsccBoundedByAccuracyPlusErrorBand) {
  Rng rng(35);
  const Hierarchy h = single_level_chain(5);
  const auto w = build_confusion_weights(h, 0, 2.0);
  double min_inv = 1.0, max_inv = 0.0;
  for (Index t = 0; t < 5; ++t)
    for (Index p = 0; p < 5; ++p)
      if (t != p) {
        min_inv = std::min(min_inv, 1.0 / w.entries(p, t));
        max_inv = std::max(max_inv, 1.0 / w.entries(p, t));
      }
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm(0, 5);
    for (int k = 0; k < 15; ++k)
      accumulate(cm, rng.next_int(0, 4), rng.next_int(0, 4));
    const double acc = accuracy(cm);
    const double value = ascc(cm, w);
    EXPECT_GE(value, acc + (1.0 - acc) * min_inv - 1e-12);
    EXPECT_LE(value, acc + (1.0 - acc) * max_inv + 1e-12);
  }
}

TEST(Auc, SeparatedScoresGiveOne) {
  std::vector<VectorX> probs;
  std::vector<Index> truth;
  for (int i = 0; i < 6; ++i) {
    VectorX p(2);
    const bool positive = i < 3;
    p << (positive ? 0.1 : 0.9), (positive ? 0.9 : 0.1);
    probs.push_back(p);
    truth.push_back(positive ? 1 : 0);
  }
  EXPECT_DOUBLE_EQ(*auc_macro_ovr(probs, truth), 1.0);
}

TEST(Auc, TiedScoresGiveHalf) {
  std::vector<VectorX> probs(8, VectorX::Constant(2, 0.5));
  std::vector<Index> truth = {0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(*auc_macro_ovr(probs, truth), 0.5);
}

TEST(Auc, SingleClassIsUndefined) {
  const std::vector<VectorX> probs(3, VectorX::Constant(2, 0.5));
  EXPECT_FALSE(auc_macro_ovr(probs, {0, 0, 0}).has_value());
}

TEST(LiteralPairing, MatchesPrintedIndexOrder) {
  const auto w = build_confusion_weights(single_level_chain(3), 0, 2.0);
  const auto cm = matrix_with(3, {{2, 0, 1}});
  // Sample-aligned pairs the (true=2, pred=0) count with W(0, 2) = 5; the
  // literal reading pairs it with W(2, 0) = 3.
  EXPECT_DOUBLE_EQ(ascc(cm, w, WeightPairing::kSampleAligned), 0.2);
  EXPECT_DOUBLE_EQ(ascc(cm, w, WeightPairing::kTransposed), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*asmc(cm, w, WeightPairing::kTransposed), 0.5);
}

}  // namespace
}  // namespace sevmil
