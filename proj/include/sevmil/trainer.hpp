#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/losses.hpp"
#include "sevmil/metrics.hpp"
#include "sevmil/remix.hpp"
#include "sevmil/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sevmil {

// Mean-pooled features with one linear head per hierarchy level:
// logits_h = W_h * mean(instances) + b_h.
struct PooledHierarchicalModel {
  std::vector<MatrixX> weights;  // per level, C_h x d
  std::vector<VectorX> biases;   // per level, C_h

  Index feature_dim() const {
    return weights.empty() ? 0 : weights.front().cols();
  }
  Index num_levels() const { return static_cast<Index>(weights.size()); }
};

PooledHierarchicalModel make_model(const Hierarchy& h, Index feature_dim);

struct OptimizerState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<MatrixX> m_weights, v_weights;
  std::vector<VectorX> m_biases, v_biases;
};

OptimizerState make_optimizer(const PooledHierarchicalModel& model,
                              double learning_rate);

// One Adam update from already-averaged gradients.
void adam_step(PooledHierarchicalModel& model, OptimizerState& opt,
               const std::vector<MatrixX>& grad_weights,
               const std::vector<VectorX>& grad_biases);

enum class LossKind {
  kCrossEntropy,
  kWeightedCE,
  kMsceHa,  // combined severity + alignment loss
  kHxe,
  kCo2,
  kCdwCe,
};

enum class RemixPolicy { kNone, kSfr, kRandomMix };

struct TrainConfig {
  Index epochs = 100;
  Index batch_size = 32;
  LossKind loss = LossKind::kMsceHa;
  HyperParams hyper;
  RemixPolicy remix = RemixPolicy::kNone;
  double remix_probability = 0.25;
  double random_mix_fraction = 0.5;
  SfrParams sfr;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
};

struct EpochTrace {
  Index epoch = 0;
  double loss = 0.0;   // mean per-sample loss
  double msce = 0.0;   // weighted severity component (combined loss only)
  double ha = 0.0;     // weighted alignment component (combined loss only)
  Index remix_fallbacks = 0;
};

struct TrainResult {
  PooledHierarchicalModel model;
  std::vector<EpochTrace> trace;
};

std::vector<VectorX> forward(const PooledHierarchicalModel& model,
                             const Bag& bag);

struct BatchGradient {
  double loss = 0.0;  // mean over the batch
  double msce = 0.0;
  double ha = 0.0;
  std::vector<MatrixX> grad_weights;
  std::vector<VectorX> grad_biases;
};

// Mean loss over the batch and its gradient with respect to every model
// parameter, composed from the loss module's logit gradients and the
// pooling/linear-head chain rule. This is the exact computation the
// training loop steps on.
BatchGradient batch_loss_and_gradient(const PooledHierarchicalModel& model,
                                      const std::vector<const Bag*>& batch,
                                      const Hierarchy& h,
                                      const TrainConfig& config);

// Shuffled minibatch training with manual backpropagation through the mean
// pooling and linear heads. With a remix policy, each sample is (with the
// configured probability) replaced by a remix of itself with a uniformly
// chosen strictly-more-urgent donor; samples without any valid donor fall
// back to the original bag and are counted in the trace.
TrainResult train(const std::vector<Bag>& dataset, const Hierarchy& h,
                  const TrainConfig& config);

struct EvalResult {
  std::vector<MetricReport> reports;        // per level
  std::vector<ConfusionMatrix> confusion;   // per level
};

EvalResult evaluate(const PooledHierarchicalModel& model,
                    const std::vector<Bag>& dataset, const Hierarchy& h,
                    double penalty,
                    RiskSevereFactor risk_factor =
                        RiskSevereFactor::kHalveSevere);

// Versioned binary parameter dump carrying a hash of the producing config.
void save_checkpoint(const PooledHierarchicalModel& model,
                     std::uint64_t config_hash, const std::string& path);
PooledHierarchicalModel load_checkpoint(const std::string& path,
                                        std::uint64_t* config_hash);

void write_trace_csv(const std::vector<EpochTrace>& trace,
                     const std::string& path);

}  // namespace sevmil
