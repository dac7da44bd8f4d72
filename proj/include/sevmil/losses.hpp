#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/types.hpp"

#include <vector>

namespace sevmil {

// Probabilities are clamped to [kProbFloor, 1] before every logarithm.
inline constexpr double kProbFloor = 1e-12;

// Every loss returns its value together with the analytic gradient with
// respect to the input logits (one vector per hierarchy level; single-level
// losses return a single vector). `clamped` reports that a probability
// clamp engaged somewhere in the evaluation.
struct LossValueAndGrad {
  double value = 0.0;
  std::vector<VectorX> grad_logits;
  bool clamped = false;
};

// Directional regularization weights of the severity-aware cross-entropy:
// entries(predicted, true) = alpha * |predicted - true| when the prediction
// is strictly less urgent than the true class, 1 otherwise.
struct LossWeightMatrix {
  Index level = 0;
  MatrixX entries;
  double alpha = 0.0;
};

struct HyperParams {
  double alpha = 1.6;     // severity scale, > 1
  double lambda1 = 2.0;   // severity term weight
  double lambda2 = 1.0;   // alignment term weight
  double delta_co2 = 0.05;
  double lambda_co2 = 1.0;
  double alpha_cdw = 1.0;
  double alpha_hxe = 0.1;
  std::vector<VectorX> class_weights;  // per level, weighted CE only
};

VectorX softmax(const VectorX& logits);

// Sum over levels of -log p[target].
LossValueAndGrad cross_entropy(const std::vector<VectorX>& logits_per_level,
                               const std::vector<Index>& targets_per_level);

std::vector<LossWeightMatrix> build_loss_weights(const Hierarchy& h,
                                                 double alpha);

// Severity-weighted cross-entropy: each level's CE term is scaled by the
// prediction-dependent weight  w = sum_i p[i] * M(i, target).
LossValueAndGrad msce(const std::vector<VectorX>& logits_per_level,
                      const std::vector<Index>& targets_per_level,
                      const std::vector<LossWeightMatrix>& weights_per_level);

// Jensen-Shannon alignment between each level's prediction and the
// aggregated prediction of the next finer level. Zero (with zero gradients)
// for single-level hierarchies. Gradients flow into both levels.
LossValueAndGrad hierarchy_alignment(
    const std::vector<VectorX>& logits_per_level, const Hierarchy& h);

// lambda1 * msce + lambda2 * hierarchy_alignment.
LossValueAndGrad combined_loss(const std::vector<VectorX>& logits_per_level,
                               const std::vector<Index>& targets_per_level,
                               const std::vector<LossWeightMatrix>& weights,
                               const Hierarchy& h, const HyperParams& hp);

LossValueAndGrad weighted_ce(const std::vector<VectorX>& logits_per_level,
                             const std::vector<Index>& targets_per_level,
                             const std::vector<VectorX>& class_weights);

// Hierarchical cross-entropy over the target's root-to-leaf path. Node
// probabilities are leaf sums of the finest softmax; each conditional term
// is discounted by exp(-alpha * depth) with depth counted from the leaf
// (leaf = 0). With alpha = 0 the product telescopes to the finest CE.
LossValueAndGrad hxe(const VectorX& finest_logits, const Hierarchy& h,
                     Index target_leaf, double alpha_hxe);

// CE plus unimodality penalties on an ordinal scale: rising probabilities
// past the target and falling probabilities before it are penalized with
// margin delta.
LossValueAndGrad co2(const VectorX& logits, Index target, double delta,
                     double lambda);

// Class-distance weighted CE: -sum_{c != target} log(1 - p[c]) |c-target|^a.
LossValueAndGrad cdw_ce(const VectorX& logits, Index target, double alpha);

}  // namespace sevmil
