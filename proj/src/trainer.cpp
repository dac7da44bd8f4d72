#include "sevmil/trainer.hpp"

#include "sevmil/error.hpp"
#include "sevmil/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sevmil {
namespace {

VectorX pooled_features(const Bag& bag) {
  return bag.instances.cast<double>().colwise().mean().transpose();
}

Index argmax(const VectorX& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return best;
}

struct SampleLoss {
  LossValueAndGrad total;
  double msce_part = 0.0;
  double ha_part = 0.0;
};

SampleLoss sample_loss(const std::vector<VectorX>& logits,
                       const std::vector<Index>& targets, const Hierarchy& h,
                       const TrainConfig& config,
                       const std::vector<LossWeightMatrix>& msce_weights) {
  SampleLoss out;
  switch (config.loss) {
    case LossKind::kCrossEntropy:
      out.total = cross_entropy(logits, targets);
      return out;
    case LossKind::kWeightedCE:
      out.total = weighted_ce(logits, targets, config.hyper.class_weights);
      return out;
    case LossKind::kMsceHa: {
      const LossValueAndGrad severity = msce(logits, targets, msce_weights);
      const LossValueAndGrad alignment = hierarchy_alignment(logits, h);
      out.msce_part = config.hyper.lambda1 * severity.value;
      out.ha_part = config.hyper.lambda2 * alignment.value;
      out.total.value = out.msce_part + out.ha_part;
      out.total.grad_logits.reserve(logits.size());
      for (std::size_t lvl = 0; lvl < logits.size(); ++lvl)
        out.total.grad_logits.push_back(
            config.hyper.lambda1 * severity.grad_logits[lvl] +
            config.hyper.lambda2 * alignment.grad_logits[lvl]);
      return out;
    }
    case LossKind::kHxe:
    case LossKind::kCo2:
    case LossKind::kCdwCe: {
      // Single-level ordinal/hierarchical baselines act on the finest head.
      const auto finest = static_cast<std::size_t>(h.finest_level());
      LossValueAndGrad fine;
      if (config.loss == LossKind::kHxe) {
        fine = hxe(logits[finest], h, targets[finest], config.hyper.alpha_hxe);
      } else if (config.loss == LossKind::kCo2) {
        fine = co2(logits[finest], targets[finest], config.hyper.delta_co2,
                   config.hyper.lambda_co2);
      } else {
        fine = cdw_ce(logits[finest], targets[finest], config.hyper.alpha_cdw);
      }
      out.total.value = fine.value;
      for (std::size_t lvl = 0; lvl < logits.size(); ++lvl)
        out.total.grad_logits.push_back(
            lvl == finest ? fine.grad_logits.front()
                          : VectorX::Zero(logits[lvl].size()).eval());
      return out;
    }
  }
  throw Error(ErrorCode::kInternal, "unknown loss kind");
}

}  // namespace

PooledHierarchicalModel make_model(const Hierarchy& h, Index feature_dim) {
  require(feature_dim >= 1, ErrorCode::kPrecondition, "feature_dim must be >= 1");
  PooledHierarchicalModel model;
  for (Index lvl = 0; lvl < h.num_levels(); ++lvl) {
    model.weights.push_back(MatrixX::Zero(h.num_classes(lvl), feature_dim));
    model.biases.push_back(VectorX::Zero(h.num_classes(lvl)));
  }
  return model;
}

OptimizerState make_optimizer(const PooledHierarchicalModel& model,
                              double learning_rate) {
  OptimizerState opt;
  opt.learning_rate = learning_rate;
  for (std::size_t lvl = 0; lvl < model.weights.size(); ++lvl) {
    opt.m_weights.push_back(MatrixX::Zero(model.weights[lvl].rows(),
                                          model.weights[lvl].cols()));
    opt.v_weights.push_back(opt.m_weights.back());
    opt.m_biases.push_back(VectorX::Zero(model.biases[lvl].size()));
    opt.v_biases.push_back(opt.m_biases.back());
  }
  return opt;
}

void adam_step(PooledHierarchicalModel& model, OptimizerState& opt,
               const std::vector<MatrixX>& grad_weights,
               const std::vector<VectorX>& grad_biases) {
  ++opt.step;
  const double bias1 = 1.0 - std::pow(opt.beta1, opt.step);
  const double bias2 = 1.0 - std::pow(opt.beta2, opt.step);
  for (std::size_t lvl = 0; lvl < model.weights.size(); ++lvl) {
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
      v = opt.beta2 * v.array().matrix() +
          (1.0 - opt.beta2) * grad.array().square().matrix();
      param.array() -= opt.learning_rate * (m.array() / bias1) /
                       ((v.array() / bias2).sqrt() + opt.epsilon);
    };
    update(model.weights[lvl], opt.m_weights[lvl], opt.v_weights[lvl],
           grad_weights[lvl]);
    update(model.biases[lvl], opt.m_biases[lvl], opt.v_biases[lvl],
           grad_biases[lvl]);
  }
}

std::vector<VectorX> forward(const PooledHierarchicalModel& model,
                             const Bag& bag) {
  require(bag.dim() == model.feature_dim(), ErrorCode::kPrecondition,
          "bag dimension does not match model");
  const VectorX pooled = pooled_features(bag);
  std::vector<VectorX> logits;
  logits.reserve(model.weights.size());
  for (std::size_t lvl = 0; lvl < model.weights.size(); ++lvl)
    logits.push_back(model.weights[lvl] * pooled + model.biases[lvl]);
  return logits;
}

BatchGradient batch_loss_and_gradient(const PooledHierarchicalModel& model,
                                      const std::vector<const Bag*>& batch,
                                      const Hierarchy& h,
                                      const TrainConfig& config) {
  require(!batch.empty(), ErrorCode::kPrecondition, "empty batch");
  std::vector<LossWeightMatrix> msce_weights;
  if (config.loss == LossKind::kMsceHa)
    msce_weights = build_loss_weights(h, config.hyper.alpha);

  BatchGradient out;
  for (std::size_t lvl = 0; lvl < model.weights.size(); ++lvl) {
    out.grad_weights.push_back(MatrixX::Zero(model.weights[lvl].rows(),
                                             model.weights[lvl].cols()));
    out.grad_biases.push_back(VectorX::Zero(model.biases[lvl].size()));
  }

  for (const Bag* bag : batch) {
    const std::vector<VectorX> logits = forward(model, *bag);
    const SampleLoss loss =
        sample_loss(logits, bag->labels, h, config, msce_weights);
    out.loss += loss.total.value;
    out.msce += loss.msce_part;
    out.ha += loss.ha_part;
    const VectorX pooled = pooled_features(*bag);
    for (std::size_t lvl = 0; lvl < out.grad_weights.size(); ++lvl) {
      out.grad_weights[lvl] += loss.total.grad_logits[lvl] * pooled.transpose();
      out.grad_biases[lvl] += loss.total.grad_logits[lvl];
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  out.msce *= scale;
  out.ha *= scale;
  for (std::size_t lvl = 0; lvl < out.grad_weights.size(); ++lvl) {
    out.grad_weights[lvl] *= scale;
    out.grad_biases[lvl] *= scale;
  }
  return out;
}

TrainResult train(const std::vector<Bag>& dataset, const Hierarchy& h,
                  const TrainConfig& config) {
  require(!dataset.empty(), ErrorCode::kPrecondition, "empty dataset");
  require(config.epochs >= 0, ErrorCode::kPrecondition, "negative epochs");
  require(config.batch_size >= 1, ErrorCode::kPrecondition,
          "batch_size must be >= 1");
  require(config.remix_probability >= 0.0 && config.remix_probability <= 1.0,
          ErrorCode::kPrecondition, "remix probability must be in [0, 1]");
  const Index dim = dataset.front().dim();
  const Index finest = h.finest_level();
  for (const Bag& bag : dataset) {
    require(bag.dim() == dim, ErrorCode::kPrecondition,
            "inconsistent feature dimensions in dataset");
    require(static_cast<Index>(bag.labels.size()) == h.num_levels(),
            ErrorCode::kPrecondition, "bag labels do not match hierarchy");
  }
  if (config.loss == LossKind::kWeightedCE) {
    require(config.hyper.class_weights.size() ==
                static_cast<std::size_t>(h.num_levels()),
            ErrorCode::kPrecondition,
            "weighted CE needs class weights per level");
  }

  TrainResult result;
  result.model = make_model(h, dim);
  OptimizerState opt = make_optimizer(result.model, config.learning_rate);
  Rng rng(config.seed);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    EpochTrace trace;
    trace.epoch = epoch;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));

      // Materialize the batch, applying the remix policy per sample: the
      // sample is the recipient, the donor is drawn uniformly among bags
      // whose finest label is strictly more urgent.
      std::vector<Bag> remixed;
      remixed.reserve(stop - start);
      std::vector<const Bag*> batch;
      batch.reserve(stop - start);
      for (std::size_t pos = start; pos < stop; ++pos) {
        const Bag* bag = &dataset[order[pos]];
        if (config.remix != RemixPolicy::kNone &&
            rng.next_double() < config.remix_probability) {
          std::vector<std::size_t> donors;
          for (std::size_t j = 0; j < dataset.size(); ++j) {
            if (h.more_urgent(finest,
                              dataset[j].labels[static_cast<std::size_t>(finest)],
                              bag->labels[static_cast<std::size_t>(finest)]))
              donors.push_back(j);
          }
          if (donors.empty()) {
            ++trace.remix_fallbacks;
          } else {
            const std::size_t donor = donors[static_cast<std::size_t>(
                rng.next_below(donors.size()))];
            const std::uint64_t remix_seed = rng.next_u64();
            if (config.remix == RemixPolicy::kSfr) {
              SfrParams params = config.sfr;
              params.seed = remix_seed;
              remixed.push_back(sfr(dataset[donor], *bag, h, params).bag);
            } else {
              remixed.push_back(random_mix(dataset[donor], *bag, h,
                                           config.random_mix_fraction,
                                           remix_seed)
                                    .bag);
            }
            bag = &remixed.back();
          }
        }
        batch.push_back(bag);
      }

      const BatchGradient grad =
          batch_loss_and_gradient(result.model, batch, h, config);
      trace.loss += grad.loss * static_cast<double>(batch.size());
      trace.msce += grad.msce * static_cast<double>(batch.size());
      trace.ha += grad.ha * static_cast<double>(batch.size());
      adam_step(result.model, opt, grad.grad_weights, grad.grad_biases);
    }

    trace.loss /= static_cast<double>(dataset.size());
    trace.msce /= static_cast<double>(dataset.size());
    trace.ha /= static_cast<double>(dataset.size());
    result.trace.push_back(trace);
  }
  return result;
}

EvalResult evaluate(const PooledHierarchicalModel& model,
                    const std::vector<Bag>& dataset, const Hierarchy& h,
                    double penalty, RiskSevereFactor risk_factor) {
  require(!dataset.empty(), ErrorCode::kPrecondition, "empty dataset");
  const Index levels = h.num_levels();

  EvalResult out;
  std::vector<std::vector<VectorX>> probs(static_cast<std::size_t>(levels));
  std::vector<std::vector<Index>> truth(static_cast<std::size_t>(levels));
  std::vector<std::vector<Index>> preds(static_cast<std::size_t>(levels));
  for (Index lvl = 0; lvl < levels; ++lvl)
    out.confusion.emplace_back(lvl, h.num_classes(lvl));

  for (const Bag& bag : dataset) {
    const std::vector<VectorX> logits = forward(model, bag);
    for (Index lvl = 0; lvl < levels; ++lvl) {
      const auto ulvl = static_cast<std::size_t>(lvl);
      const VectorX p = softmax(logits[ulvl]);
      const Index predicted = argmax(p);
      probs[ulvl].push_back(p);
      truth[ulvl].push_back(bag.labels[ulvl]);
      preds[ulvl].push_back(predicted);
      accumulate(out.confusion[ulvl], bag.labels[ulvl], predicted);
    }
  }

  for (Index lvl = 0; lvl < levels; ++lvl) {
    const auto ulvl = static_cast<std::size_t>(lvl);
    MetricReport report =
        report_from_confusion(out.confusion[ulvl], h, penalty, risk_factor);
    report.auc = auc_macro_ovr(probs[ulvl], truth[ulvl]);
    for (Index c = 0; c < h.num_classes(lvl); ++c)
      report.expected_error_class[static_cast<std::size_t>(c)] =
          expected_error_class(probs[ulvl], truth[ulvl], preds[ulvl], c);
    out.reports.push_back(std::move(report));
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'I', 'L', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_scalar(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_scalar(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(in.good(), ErrorCode::kTruncatedFile, "truncated checkpoint: " + path);
  return value;
}

}  // namespace

void save_checkpoint(const PooledHierarchicalModel& model,
                     std::uint64_t config_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kFileFormat, "cannot open for write: " + path);
  out.write(kCheckpointMagic, 4);
  write_scalar(out, kCheckpointVersion);
  write_scalar(out, config_hash);
  write_scalar(out, static_cast<std::uint32_t>(model.num_levels()));
  write_scalar(out, static_cast<std::uint32_t>(model.feature_dim()));
  for (std::size_t lvl = 0; lvl < model.weights.size(); ++lvl) {
    write_scalar(out, static_cast<std::uint32_t>(model.weights[lvl].rows()));
    for (Index r = 0; r < model.weights[lvl].rows(); ++r)
      for (Index c = 0; c < model.weights[lvl].cols(); ++c)
        write_scalar(out, model.weights[lvl](r, c));
    for (Index r = 0; r < model.biases[lvl].size(); ++r)
      write_scalar(out, model.biases[lvl][r]);
  }
  require(out.good(), ErrorCode::kFileFormat, "write failed: " + path);
}

PooledHierarchicalModel load_checkpoint(const std::string& path,
                                        std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kFileFormat, "cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 4) == 0,
          ErrorCode::kMagicMismatch, "not a checkpoint file: " + path);
  const auto version = read_scalar<std::uint32_t>(in, path);
  require(version == kCheckpointVersion, ErrorCode::kUnsupportedVersion,
          "unsupported checkpoint version " + std::to_string(version));
  const auto hash = read_scalar<std::uint64_t>(in, path);
  if (config_hash != nullptr) *config_hash = hash;
  const auto levels = read_scalar<std::uint32_t>(in, path);
  const auto dim = read_scalar<std::uint32_t>(in, path);
  PooledHierarchicalModel model;
  for (std::uint32_t lvl = 0; lvl < levels; ++lvl) {
    const auto classes = read_scalar<std::uint32_t>(in, path);
    MatrixX w(classes, dim);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c)
        w(r, c) = read_scalar<double>(in, path);
    VectorX b(classes);
    for (Index r = 0; r < b.size(); ++r) b[r] = read_scalar<double>(in, path);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  in.peek();
  require(in.eof(), ErrorCode::kFileFormat,
          "trailing bytes after checkpoint payload: " + path);
  return model;
}

void write_trace_csv(const std::vector<EpochTrace>& trace,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::kFileFormat, "cannot open for write: " + path);
  out << "epoch,loss,msce,ha,remix_fallbacks\n";
  out.precision(17);
  for (const EpochTrace& t : trace)
    out << t.epoch << "," << t.loss << "," << t.msce << "," << t.ha << ","
        << t.remix_fallbacks << "\n";
  require(out.good(), ErrorCode::kFileFormat, "write failed: " + path);
}

}  // namespace sevmil
