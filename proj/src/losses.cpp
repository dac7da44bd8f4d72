#include "sevmil/losses.hpp"

#include "sevmil/error.hpp"

#include <cmath>

namespace sevmil {
namespace {

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_levels(const std::vector<VectorX>& logits,
                  const std::vector<Index>& targets) {
  require(logits.size() == targets.size(), ErrorCode::kPrecondition,
          "level count mismatch between logits and targets");
  require(!logits.empty(), ErrorCode::kPrecondition, "no levels given");
  for (std::size_t h = 0; h < logits.size(); ++h) {
    require(targets[h] >= 0 && targets[h] < logits[h].size(),
            ErrorCode::kPrecondition, "target class out of range");
  }
}

std::vector<VectorX> zero_like(const std::vector<VectorX>& logits) {
  std::vector<VectorX> grads;
  grads.reserve(logits.size());
  for (const auto& z : logits) grads.push_back(VectorX::Zero(z.size()));
  return grads;
}

// d(g . p)/dz for p = softmax(z) and upstream dL/dp = g.
VectorX chain_softmax(const VectorX& p, const VectorX& g) {
  const double mean = g.dot(p);
  return p.array() * (g.array() - mean);
}

}  // namespace

VectorX softmax(const VectorX& logits) {
  const double shift = logits.maxCoeff();
  VectorX p = (logits.array() - shift).exp();
  p /= p.sum();
  return p;
}

LossValueAndGrad cross_entropy(const std::vector<VectorX>& logits_per_level,
                               const std::vector<Index>& targets_per_level) {
  check_levels(logits_per_level, targets_per_level);
  LossValueAndGrad out;
  out.grad_logits.reserve(logits_per_level.size());
  for (std::size_t h = 0; h < logits_per_level.size(); ++h) {
    const VectorX p = softmax(logits_per_level[h]);
    const Index t = targets_per_level[h];
    out.value += -safe_log(p[t]);
    VectorX g = p;
    g[t] -= 1.0;
    out.grad_logits.push_back(std::move(g));
  }
  return out;
}

std::vector<LossWeightMatrix> build_loss_weights(const Hierarchy& h,
                                                 double alpha) {
  require(alpha > 1.0, ErrorCode::kPrecondition,
          "severity scale alpha must be > 1");
  std::vector<LossWeightMatrix> weights;
  weights.reserve(static_cast<std::size_t>(h.num_levels()));
  for (Index lvl = 0; lvl < h.num_levels(); ++lvl) {
    const Index c = h.num_classes(lvl);
    LossWeightMatrix w;
    w.level = lvl;
    w.alpha = alpha;
    w.entries = MatrixX::Ones(c, c);
    for (Index pred = 0; pred < c; ++pred)
      for (Index truth = 0; truth < c; ++truth)
        if (is_severe(h, lvl, pred, truth))
          w.entries(pred, truth) = alpha * static_cast<double>(
                                       std::abs(pred - truth));
    weights.push_back(std::move(w));
  }
  return weights;
}

LossValueAndGrad msce(const std::vector<VectorX>& logits_per_level,
                      const std::vector<Index>& targets_per_level,
                      const std::vector<LossWeightMatrix>& weights_per_level) {
  check_levels(logits_per_level, targets_per_level);
  require(weights_per_level.size() == logits_per_level.size(),
          ErrorCode::kPrecondition, "weight matrix count mismatch");
  LossValueAndGrad out;
  out.grad_logits.reserve(logits_per_level.size());
  for (std::size_t h = 0; h < logits_per_level.size(); ++h) {
    const MatrixX& m = weights_per_level[h].entries;
    require(m.rows() == logits_per_level[h].size() &&
                m.cols() == logits_per_level[h].size(),
            ErrorCode::kPrecondition, "weight matrix shape mismatch");
    const VectorX p = softmax(logits_per_level[h]);
    const Index t = targets_per_level[h];
    const double ce = -safe_log(p[t]);
    const double w = p.dot(m.col(t));
    out.value += w * ce;
    // Product rule: the weight w depends on p as well, so the gradient has
    // a CE branch scaled by w and a branch through dw/dz.
    VectorX g_ce = p;
    g_ce[t] -= 1.0;
    const VectorX dw_dz = p.array() * (m.col(t).array() - w);
    out.grad_logits.push_back(ce * dw_dz + w * g_ce);
  }
  return out;
}

LossValueAndGrad hierarchy_alignment(
    const std::vector<VectorX>& logits_per_level, const Hierarchy& h) {
  require(static_cast<Index>(logits_per_level.size()) == h.num_levels(),
          ErrorCode::kPrecondition, "level count mismatch with hierarchy");
  LossValueAndGrad out;
  out.grad_logits = zero_like(logits_per_level);
  if (h.num_levels() < 2) return out;  // value 0, zero gradients

  std::vector<VectorX> probs;
  probs.reserve(logits_per_level.size());
  for (const auto& z : logits_per_level) probs.push_back(softmax(z));

  for (Index lvl = 0; lvl + 1 < h.num_levels(); ++lvl) {
    const VectorX& p = probs[static_cast<std::size_t>(lvl)];
    const VectorX& fine = probs[static_cast<std::size_t>(lvl + 1)];
    const VectorX q = aggregate_to_parent(h, lvl + 1, fine);
    const VectorX m = 0.5 * (p + q);

    double js = 0.0;
    VectorX gp(p.size());
    VectorX gq(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      const double lp = safe_log(p[i]) - safe_log(m[i]);
      const double lq = safe_log(q[i]) - safe_log(m[i]);
      js += 0.5 * (p[i] * lp + q[i] * lq);
      gp[i] = 0.5 * lp;
      gq[i] = 0.5 * lq;
    }
    out.value += std::max(js, 0.0);

    out.grad_logits[static_cast<std::size_t>(lvl)] += chain_softmax(p, gp);
    // The finer level enters through the parent sums: each fine class
    // inherits the gradient of its parent's aggregated component.
    VectorX g_fine(fine.size());
    for (Index c = 0; c < fine.size(); ++c) g_fine[c] = gq[h.parent(lvl + 1, c)];
    out.grad_logits[static_cast<std::size_t>(lvl + 1)] +=
        chain_softmax(fine, g_fine);
  }
  return out;
}

LossValueAndGrad combined_loss(const std::vector<VectorX>& logits_per_level,
                               const std::vector<Index>& targets_per_level,
                               const std::vector<LossWeightMatrix>& weights,
                               const Hierarchy& h, const HyperParams& hp) {
  const LossValueAndGrad severity =
      msce(logits_per_level, targets_per_level, weights);
  const LossValueAndGrad alignment =
      hierarchy_alignment(logits_per_level, h);
  LossValueAndGrad out;
  out.value = hp.lambda1 * severity.value + hp.lambda2 * alignment.value;
  out.clamped = severity.clamped || alignment.clamped;
  out.grad_logits.reserve(logits_per_level.size());
  for (std::size_t lvl = 0; lvl < logits_per_level.size(); ++lvl)
    out.grad_logits.push_back(hp.lambda1 * severity.grad_logits[lvl] +
                              hp.lambda2 * alignment.grad_logits[lvl]);
  return out;
}

LossValueAndGrad weighted_ce(const std::vector<VectorX>& logits_per_level,
                             const std::vector<Index>& targets_per_level,
                             const std::vector<VectorX>& class_weights) {
  check_levels(logits_per_level, targets_per_level);
  require(class_weights.size() == logits_per_level.size(),
          ErrorCode::kPrecondition, "class weight level count mismatch");
  LossValueAndGrad out;
  out.grad_logits.reserve(logits_per_level.size());
  for (std::size_t h = 0; h < logits_per_level.size(); ++h) {
    require(class_weights[h].size() == logits_per_level[h].size(),
            ErrorCode::kPrecondition, "class weight vector length mismatch");
    require(class_weights[h].minCoeff() > 0.0, ErrorCode::kPrecondition,
            "class weights must be positive");
    const VectorX p = softmax(logits_per_level[h]);
    const Index t = targets_per_level[h];
    const double w = class_weights[h][t];
    out.value += -w * safe_log(p[t]);
    VectorX g = p;
    g[t] -= 1.0;
    out.grad_logits.push_back(w * g);
  }
  return out;
}

LossValueAndGrad hxe(const VectorX& finest_logits, const Hierarchy& h,
                     Index target_leaf, double alpha_hxe) {
  const Index levels = h.num_levels();
  require(levels >= 2, ErrorCode::kPrecondition,
          "hxe needs a hierarchy with at least 2 levels");
  const Index finest = h.finest_level();
  const Index leaves = h.num_classes(finest);
  require(finest_logits.size() == leaves, ErrorCode::kPrecondition,
          "logit vector does not match finest level");
  require(target_leaf >= 0 && target_leaf < leaves, ErrorCode::kPrecondition,
          "target class out of range");

  const VectorX p = softmax(finest_logits);

  // Ancestor of every leaf at each level, and of the target in particular.
  std::vector<std::vector<Index>> ancestor(
      static_cast<std::size_t>(levels),
      std::vector<Index>(static_cast<std::size_t>(leaves)));
  for (Index leaf = 0; leaf < leaves; ++leaf) {
    Index node = leaf;
    for (Index lvl = finest; lvl >= 0; --lvl) {
      ancestor[static_cast<std::size_t>(lvl)][static_cast<std::size_t>(leaf)] =
          node;
      if (lvl > 0) node = h.parent(lvl, node);
    }
  }

  // Leaf mass of the target's ancestor node per level.
  VectorX mass(levels);
  for (Index lvl = 0; lvl < levels; ++lvl) {
    const Index node =
        ancestor[static_cast<std::size_t>(lvl)][static_cast<std::size_t>(target_leaf)];
    double sum = 0.0;
    for (Index leaf = 0; leaf < leaves; ++leaf)
      if (ancestor[static_cast<std::size_t>(lvl)][static_cast<std::size_t>(leaf)] ==
          node)
        sum += p[leaf];
    mass[lvl] = sum;
  }

  LossValueAndGrad out;
  // Conditional term of the node at level lvl has depth (finest - lvl) from
  // the leaf; collecting coefficients of ln mass[lvl] across the telescoping
  // differences gives k(lvl) - k(lvl + 1) with k past the leaf set to 0.
  auto discount = [&](Index lvl) {
    return std::exp(-alpha_hxe * static_cast<double>(finest - lvl));
  };
  VectorX g_prob = VectorX::Zero(leaves);
  for (Index lvl = 0; lvl < levels; ++lvl) {
    const double coeff = discount(lvl) - (lvl + 1 < levels ? discount(lvl + 1) : 0.0);
    if (mass[lvl] <= kProbFloor) out.clamped = true;
    const double m = std::max(mass[lvl], kProbFloor);
    out.value += -coeff * std::log(m);
    const Index node =
        ancestor[static_cast<std::size_t>(lvl)][static_cast<std::size_t>(target_leaf)];
    for (Index leaf = 0; leaf < leaves; ++leaf)
      if (ancestor[static_cast<std::size_t>(lvl)][static_cast<std::size_t>(leaf)] ==
          node)
        g_prob[leaf] += -coeff / m;
  }
  out.grad_logits.push_back(chain_softmax(p, g_prob));
  return out;
}

LossValueAndGrad co2(const VectorX& logits, Index target, double delta,
                     double lambda) {
  const Index c = logits.size();
  require(target >= 0 && target < c, ErrorCode::kPrecondition,
          "target class out of range");
  require(delta >= 0.0, ErrorCode::kPrecondition, "delta must be >= 0");

  const VectorX p = softmax(logits);
  LossValueAndGrad out;
  out.value = -safe_log(p[target]);
  VectorX g_prob = VectorX::Zero(c);

  // Unimodality penalties; active terms contribute a +/- lambda pair. The
  // descending branch stops strictly before the target: including the
  // target itself would penalize the peak for exceeding its right
  // neighbor, and no strictly unimodal prediction could ever be free of
  // penalty.
  for (Index i = target; i + 1 < c; ++i) {  // rising past the target
    const double arg = delta + p[i + 1] - p[i];
    if (arg > 0.0) {
      out.value += lambda * arg;
      g_prob[i + 1] += lambda;
      g_prob[i] -= lambda;
    }
  }
  for (Index i = 0; i < target; ++i) {  // falling before it
    const double arg = delta + p[i] - p[i + 1];
    if (arg > 0.0) {
      out.value += lambda * arg;
      g_prob[i] += lambda;
      g_prob[i + 1] -= lambda;
    }
  }

  VectorX g_ce = p;
  g_ce[target] -= 1.0;
  out.grad_logits.push_back(g_ce + chain_softmax(p, g_prob));
  return out;
}

LossValueAndGrad cdw_ce(const VectorX& logits, Index target, double alpha) {
  const Index c = logits.size();
  require(target >= 0 && target < c, ErrorCode::kPrecondition,
          "target class out of range");
  require(alpha >= 1.0, ErrorCode::kPrecondition, "alpha must be >= 1");

  const VectorX p = softmax(logits);
  LossValueAndGrad out;
  VectorX g_prob = VectorX::Zero(c);
  for (Index i = 0; i < c; ++i) {
    if (i == target) continue;
    const double dist = std::pow(static_cast<double>(std::abs(i - target)), alpha);
    double rest = 1.0 - p[i];
    if (rest < kProbFloor) {
      rest = kProbFloor;
      out.clamped = true;
    }
    out.value += -std::log(rest) * dist;
    g_prob[i] = dist / rest;
  }
  out.grad_logits.push_back(chain_softmax(p, g_prob));
  return out;
}

}  // namespace sevmil
