#include "sevmil/config.hpp"

#include "sevmil/error.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sevmil {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  require(obj.is_object(), ErrorCode::kInvalidConfig,
          context + " must be a JSON object");
  for (const auto& item : obj.items())
    require(allowed.count(item.key()) != 0, ErrorCode::kInvalidConfig,
            "unknown key \"" + item.key() + "\" in " + context);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                "bad value for \"" + key + "\": " + e.what());
  }
}

Hierarchy parse_hierarchy(const json& node) {
  check_keys(node, {"levels", "parents", "priority"}, "hierarchy");
  require(node.contains("levels"), ErrorCode::kInvalidConfig,
          "hierarchy.levels is required");

  Hierarchy h;
  for (const auto& level : node.at("levels")) {
    std::vector<std::string> names;
    for (const auto& name : level) names.push_back(name.get<std::string>());
    h.class_names.push_back(std::move(names));
  }
  const Index levels = h.num_levels();
  require(levels >= 1, ErrorCode::kInvalidConfig, "hierarchy has no levels");

  h.parent_of.resize(static_cast<std::size_t>(levels));
  if (levels > 1) {
    require(node.contains("parents"), ErrorCode::kInvalidConfig,
            "hierarchy.parents is required for multi-level hierarchies");
    const auto& parents = node.at("parents");
    require(parents.is_array() &&
                parents.size() == static_cast<std::size_t>(levels - 1),
            ErrorCode::kInvalidConfig,
            "hierarchy.parents needs one array per level below the coarsest");
    for (Index lvl = 1; lvl < levels; ++lvl)
      h.parent_of[static_cast<std::size_t>(lvl)] =
          parents.at(static_cast<std::size_t>(lvl - 1))
              .get<std::vector<Index>>();
  }

  const json priority =
      node.contains("priority") ? node.at("priority") : json{{"mode", "chain"}};
  check_keys(priority, {"mode", "more_urgent", "equivalent"},
             "hierarchy.priority");
  const auto mode = get_or<std::string>(priority, "mode", "chain");
  for (Index lvl = 0; lvl < levels; ++lvl)
    h.priority.emplace_back(h.num_classes(lvl));
  if (mode == "chain") {
    for (Index lvl = 0; lvl < levels; ++lvl)
      for (Index i = 0; i < h.num_classes(lvl); ++i)
        for (Index j = 0; j < i; ++j)
          h.priority[static_cast<std::size_t>(lvl)].set(i, j,
                                                        Relation::kMoreUrgent);
  } else if (mode == "pairs") {
    auto apply = [&](const char* key, Relation rel) {
      for (const auto& triple : get_or<json>(priority, key, json::array())) {
        require(triple.is_array() && triple.size() == 3,
                ErrorCode::kInvalidConfig,
                std::string("hierarchy.priority.") + key +
                    " entries must be [level, a, b]");
        const auto lvl = triple.at(0).get<Index>();
        const auto a = triple.at(1).get<Index>();
        const auto b = triple.at(2).get<Index>();
        require(lvl >= 0 && lvl < levels, ErrorCode::kInvalidConfig,
                "priority pair level out of range");
        require(a >= 0 && a < h.num_classes(lvl) && b >= 0 &&
                    b < h.num_classes(lvl),
                ErrorCode::kInvalidConfig, "priority pair class out of range");
        h.priority[static_cast<std::size_t>(lvl)].set(a, b, rel);
      }
    };
    apply("more_urgent", Relation::kMoreUrgent);
    apply("equivalent", Relation::kEquivalent);
    close_priority(h);
  } else {
    throw Error(ErrorCode::kInvalidConfig,
                "hierarchy.priority.mode must be \"chain\" or \"pairs\"");
  }

  const ValidationReport report = validate(h);
  if (!report.ok()) {
    std::ostringstream msg;
    msg << "invalid hierarchy:";
    for (const auto& v : report.violations) msg << " [" << v << "]";
    throw Error(ErrorCode::kInvalidConfig, msg.str());
  }
  return h;
}

SynthSpec parse_synth(const json& node, const Hierarchy& h) {
  check_keys(node,
             {"feature_dim", "instances_per_bag", "class_centers",
              "auto_centers", "background_center", "noise_sigma",
              "background_fraction", "target_fraction", "bags_per_class",
              "seed"},
             "synth");
  SynthSpec spec;
  spec.feature_dim = get_or<Index>(node, "feature_dim", 16);
  if (node.contains("instances_per_bag")) {
    const auto range = node.at("instances_per_bag").get<std::vector<Index>>();
    require(range.size() == 2, ErrorCode::kInvalidConfig,
            "synth.instances_per_bag must be [min, max]");
    spec.min_instances = range[0];
    spec.max_instances = range[1];
  }
  spec.noise_sigma = get_or<double>(node, "noise_sigma", 0.5);
  spec.background_fraction = get_or<double>(node, "background_fraction", 0.3);
  if (node.contains("target_fraction")) {
    const auto range = node.at("target_fraction").get<std::vector<double>>();
    require(range.size() == 2, ErrorCode::kInvalidConfig,
            "synth.target_fraction must be [min, max]");
    spec.target_fraction_min = range[0];
    spec.target_fraction_max = range[1];
  }
  spec.bags_per_class = get_or<Index>(node, "bags_per_class", 100);
  spec.seed = get_or<std::uint64_t>(node, "seed", 0);

  const Index classes = h.num_classes(h.finest_level());
  if (node.contains("class_centers")) {
    for (const auto& center : node.at("class_centers")) {
      const auto values = center.get<std::vector<double>>();
      spec.class_centers.emplace_back(
          Eigen::Map<const VectorX>(values.data(),
                                    static_cast<Index>(values.size())));
    }
  } else {
    check_keys(get_or<json>(node, "auto_centers", json::object()),
               {"layout", "scale"}, "synth.auto_centers");
    const json auto_centers = get_or<json>(node, "auto_centers", json::object());
    const auto layout = get_or<std::string>(auto_centers, "layout", "axes");
    const double scale = get_or<double>(auto_centers, "scale", 4.0);
    for (Index c = 0; c < classes; ++c) {
      VectorX center = VectorX::Zero(spec.feature_dim);
      if (layout == "axes") {
        center[c % spec.feature_dim] = scale;
        if (c >= spec.feature_dim) center[0] += static_cast<double>(c);
      } else if (layout == "line") {
        // Collinear centers: adjacent classes sit `scale` apart along a
        // fixed direction, offset so no center is the zero vector.
        center[0] = scale * static_cast<double>(c + 1);
        center[1 % spec.feature_dim] = 1.0;
      } else {
        throw Error(ErrorCode::kInvalidConfig,
                    "synth.auto_centers.layout must be \"axes\" or \"line\"");
      }
      spec.class_centers.push_back(std::move(center));
    }
  }
  if (node.contains("background_center")) {
    const auto values = node.at("background_center").get<std::vector<double>>();
    spec.background_center = Eigen::Map<const VectorX>(
        values.data(), static_cast<Index>(values.size()));
  }
  return spec;
}

LossKind parse_loss(const std::string& name) {
  if (name == "ce") return LossKind::kCrossEntropy;
  if (name == "weighted_ce") return LossKind::kWeightedCE;
  if (name == "msce_ha") return LossKind::kMsceHa;
  if (name == "hxe") return LossKind::kHxe;
  if (name == "co2") return LossKind::kCo2;
  if (name == "cdw_ce") return LossKind::kCdwCe;
  throw Error(ErrorCode::kInvalidConfig, "unknown loss \"" + name + "\"");
}

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kWeightedCE: return "weighted_ce";
    case LossKind::kMsceHa: return "msce_ha";
    case LossKind::kHxe: return "hxe";
    case LossKind::kCo2: return "co2";
    case LossKind::kCdwCe: return "cdw_ce";
  }
  return "ce";
}

RemixPolicy parse_remix(const std::string& name) {
  if (name == "none") return RemixPolicy::kNone;
  if (name == "sfr") return RemixPolicy::kSfr;
  if (name == "random_mix") return RemixPolicy::kRandomMix;
  throw Error(ErrorCode::kInvalidConfig, "unknown remix policy \"" + name + "\"");
}

const char* remix_name(RemixPolicy policy) {
  switch (policy) {
    case RemixPolicy::kNone: return "none";
    case RemixPolicy::kSfr: return "sfr";
    case RemixPolicy::kRandomMix: return "random_mix";
  }
  return "none";
}

HyperParams parse_hyper(const json& node, const Hierarchy& h) {
  check_keys(node,
             {"alpha", "lambda1", "lambda2", "delta_co2", "lambda_co2",
              "alpha_cdw", "alpha_hxe", "class_weights"},
             "hyper");
  HyperParams hp;
  hp.alpha = get_or<double>(node, "alpha", 1.6);
  hp.lambda1 = get_or<double>(node, "lambda1", 2.0);
  hp.lambda2 = get_or<double>(node, "lambda2", 1.0);
  hp.delta_co2 = get_or<double>(node, "delta_co2", 0.05);
  hp.lambda_co2 = get_or<double>(node, "lambda_co2", 1.0);
  hp.alpha_cdw = get_or<double>(node, "alpha_cdw", 1.0);
  hp.alpha_hxe = get_or<double>(node, "alpha_hxe", 0.1);
  require(hp.alpha > 0 && hp.lambda1 >= 0 && hp.lambda2 >= 0 &&
              hp.delta_co2 >= 0 && hp.lambda_co2 >= 0 && hp.alpha_cdw >= 1 &&
              hp.alpha_hxe >= 0,
          ErrorCode::kInvalidConfig, "hyper parameters out of range");
  if (node.contains("class_weights")) {
    const auto& weights = node.at("class_weights");
    require(weights.is_array() &&
                weights.size() == static_cast<std::size_t>(h.num_levels()),
            ErrorCode::kInvalidConfig,
            "hyper.class_weights needs one vector per level");
    for (Index lvl = 0; lvl < h.num_levels(); ++lvl) {
      const auto values =
          weights.at(static_cast<std::size_t>(lvl)).get<std::vector<double>>();
      require(static_cast<Index>(values.size()) == h.num_classes(lvl),
              ErrorCode::kInvalidConfig, "class weight vector length mismatch");
      hp.class_weights.emplace_back(Eigen::Map<const VectorX>(
          values.data(), static_cast<Index>(values.size())));
    }
  }
  return hp;
}

TrainConfig parse_train(const json& node, const Hierarchy& h,
                        const json& hyper_node) {
  check_keys(node,
             {"epochs", "batch_size", "loss", "remix", "remix_probability",
              "random_mix_fraction", "learning_rate", "seed", "sfr"},
             "train");
  TrainConfig config;
  config.epochs = get_or<Index>(node, "epochs", 100);
  config.batch_size = get_or<Index>(node, "batch_size", 32);
  config.loss = parse_loss(get_or<std::string>(node, "loss", "msce_ha"));
  config.remix = parse_remix(get_or<std::string>(node, "remix", "none"));
  config.remix_probability = get_or<double>(node, "remix_probability", 0.25);
  config.random_mix_fraction =
      get_or<double>(node, "random_mix_fraction", 0.5);
  config.learning_rate = get_or<double>(node, "learning_rate", 1e-4);
  config.seed = get_or<std::uint64_t>(node, "seed", 0);
  config.hyper = parse_hyper(hyper_node, h);

  const json sfr_node = get_or<json>(node, "sfr", json::object());
  check_keys(sfr_node, {"num_clusters", "refine_iters", "top_k"}, "train.sfr");
  config.sfr.num_clusters = get_or<Index>(sfr_node, "num_clusters", 11);
  config.sfr.refine_iters = get_or<Index>(sfr_node, "refine_iters", 6);
  config.sfr.top_k = get_or<Index>(sfr_node, "top_k", 6);
  return config;
}

}  // namespace

ExperimentConfig parse_config(const json& root) {
  check_keys(root,
             {"hierarchy", "synth", "train", "hyper", "metrics", "output_dir"},
             "config");
  require(root.contains("hierarchy"), ErrorCode::kInvalidConfig,
          "config.hierarchy is required");
  ExperimentConfig config;
  config.hierarchy = parse_hierarchy(root.at("hierarchy"));
  config.synth = parse_synth(get_or<json>(root, "synth", json::object()),
                             config.hierarchy);
  config.train = parse_train(get_or<json>(root, "train", json::object()),
                             config.hierarchy,
                             get_or<json>(root, "hyper", json::object()));

  const json metrics = get_or<json>(root, "metrics", json::object());
  check_keys(metrics, {"penalty", "risk_factor"}, "metrics");
  config.metric_penalty = get_or<double>(metrics, "penalty", 2.0);
  require(config.metric_penalty >= 0.0, ErrorCode::kInvalidConfig,
          "metrics.penalty must be >= 0");
  const auto factor = get_or<std::string>(metrics, "risk_factor", "half");
  if (factor == "half") {
    config.risk_factor = RiskSevereFactor::kHalveSevere;
  } else if (factor == "double") {
    config.risk_factor = RiskSevereFactor::kDoubleSevere;
  } else {
    throw Error(ErrorCode::kInvalidConfig,
                "metrics.risk_factor must be \"half\" or \"double\"");
  }
  config.output_dir = get_or<std::string>(root, "output_dir", "out");
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kInvalidConfig, "cannot open config: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("config parse error: ") + e.what());
  }
  return parse_config(root);
}

json config_to_json(const ExperimentConfig& config) {
  json root;

  json hierarchy;
  hierarchy["levels"] = config.hierarchy.class_names;
  json parents = json::array();
  for (Index lvl = 1; lvl < config.hierarchy.num_levels(); ++lvl)
    parents.push_back(config.hierarchy.parent_of[static_cast<std::size_t>(lvl)]);
  hierarchy["parents"] = parents;
  // Canonical form: the full closed relation as explicit pairs.
  json more_urgent = json::array();
  json equivalent = json::array();
  for (Index lvl = 0; lvl < config.hierarchy.num_levels(); ++lvl) {
    const Index classes = config.hierarchy.num_classes(lvl);
    for (Index i = 0; i < classes; ++i) {
      for (Index j = 0; j < classes; ++j) {
        if (config.hierarchy.more_urgent(lvl, i, j))
          more_urgent.push_back({lvl, i, j});
        if (i < j && config.hierarchy.equivalent(lvl, i, j))
          equivalent.push_back({lvl, i, j});
      }
    }
  }
  hierarchy["priority"] = {{"mode", "pairs"},
                           {"more_urgent", more_urgent},
                           {"equivalent", equivalent}};
  root["hierarchy"] = hierarchy;

  json synth;
  synth["feature_dim"] = config.synth.feature_dim;
  synth["instances_per_bag"] = {config.synth.min_instances,
                                config.synth.max_instances};
  json centers = json::array();
  for (const auto& center : config.synth.class_centers)
    centers.push_back(std::vector<double>(center.data(),
                                          center.data() + center.size()));
  synth["class_centers"] = centers;
  if (config.synth.background_center.size() != 0)
    synth["background_center"] = std::vector<double>(
        config.synth.background_center.data(),
        config.synth.background_center.data() +
            config.synth.background_center.size());
  synth["noise_sigma"] = config.synth.noise_sigma;
  synth["background_fraction"] = config.synth.background_fraction;
  synth["target_fraction"] = {config.synth.target_fraction_min,
                              config.synth.target_fraction_max};
  synth["bags_per_class"] = config.synth.bags_per_class;
  synth["seed"] = config.synth.seed;
  root["synth"] = synth;

  json train;
  train["epochs"] = config.train.epochs;
  train["batch_size"] = config.train.batch_size;
  train["loss"] = loss_name(config.train.loss);
  train["remix"] = remix_name(config.train.remix);
  train["remix_probability"] = config.train.remix_probability;
  train["random_mix_fraction"] = config.train.random_mix_fraction;
  train["learning_rate"] = config.train.learning_rate;
  train["seed"] = config.train.seed;
  train["sfr"] = {{"num_clusters", config.train.sfr.num_clusters},
                  {"refine_iters", config.train.sfr.refine_iters},
                  {"top_k", config.train.sfr.top_k}};
  root["train"] = train;

  json hyper;
  hyper["alpha"] = config.train.hyper.alpha;
  hyper["lambda1"] = config.train.hyper.lambda1;
  hyper["lambda2"] = config.train.hyper.lambda2;
  hyper["delta_co2"] = config.train.hyper.delta_co2;
  hyper["lambda_co2"] = config.train.hyper.lambda_co2;
  hyper["alpha_cdw"] = config.train.hyper.alpha_cdw;
  hyper["alpha_hxe"] = config.train.hyper.alpha_hxe;
  if (!config.train.hyper.class_weights.empty()) {
    json weights = json::array();
    for (const auto& w : config.train.hyper.class_weights)
      weights.push_back(std::vector<double>(w.data(), w.data() + w.size()));
    hyper["class_weights"] = weights;
  }
  root["hyper"] = hyper;

  root["metrics"] = {
      {"penalty", config.metric_penalty},
      {"risk_factor", config.risk_factor == RiskSevereFactor::kHalveSevere
                          ? "half"
                          : "double"}};
  root["output_dir"] = config.output_dir;
  return root;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

json optional_to_json(const std::optional<double>& value,
                      const char* when_missing) {
  if (!value.has_value()) {
    if (when_missing == nullptr) return nullptr;
    return when_missing;
  }
  return *value;
}

}  // namespace

json report_to_json(const MetricReport& report) {
  json out;
  out["level"] = report.level;
  out["accuracy"] = report.accuracy;
  out["auc"] = optional_to_json(report.auc, nullptr);
  out["ascc"] = report.ascc;
  // Undefined AsMC is the no-misclassification singular case; it serializes
  // as the string "inf", never as a float.
  out["asmc"] = optional_to_json(report.asmc, "inf");
  out["expected_risk"] = optional_to_json(report.expected_risk, nullptr);
  out["severe_error_count"] = report.severe_errors;
  json expected = json::array();
  for (const auto& value : report.expected_error_class)
    expected.push_back(optional_to_json(value, nullptr));
  out["expected_error_class"] = expected;
  return out;
}

json reports_to_json(const std::vector<MetricReport>& reports) {
  json out = json::array();
  for (const auto& report : reports) out.push_back(report_to_json(report));
  return out;
}

std::string reports_to_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out.precision(17);
  out << "level,metric,value\n";
  auto emit = [&](Index level, const std::string& metric, const json& value) {
    out << level << "," << metric << ",";
    if (value.is_null()) {
      out << "";
    } else if (value.is_string()) {
      out << value.get<std::string>();
    } else {
      out << value.dump();
    }
    out << "\n";
  };
  for (const auto& report : reports) {
    emit(report.level, "accuracy", report.accuracy);
    emit(report.level, "auc", optional_to_json(report.auc, nullptr));
    emit(report.level, "ascc", report.ascc);
    emit(report.level, "asmc", optional_to_json(report.asmc, "inf"));
    emit(report.level, "expected_risk",
         optional_to_json(report.expected_risk, nullptr));
    emit(report.level, "severe_error_count", report.severe_errors);
    for (std::size_t c = 0; c < report.expected_error_class.size(); ++c)
      emit(report.level, "expected_error_class_" + std::to_string(c),
           optional_to_json(report.expected_error_class[c], nullptr));
  }
  return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true,pred,count\n";
  for (Index t = 0; t < cm.classes(); ++t)
    for (Index p = 0; p < cm.classes(); ++p)
      if (cm.counts(t, p) != 0)
        out << t << "," << p << "," << cm.counts(t, p) << "\n";
  return out.str();
}

ConfusionMatrix confusion_from_csv(const std::string& text, Index level,
                                   Index classes) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFileFormat,
          "empty confusion CSV");
  // tolerate a trailing \r from windows-edited files
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "true,pred,count", ErrorCode::kFileFormat,
          "confusion CSV must start with header \"true,pred,count\"");

  ConfusionMatrix cm(level, classes);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    long t = 0, p = 0, count = 0;
    char comma1 = 0, comma2 = 0;
    row >> t >> comma1 >> p >> comma2 >> count;
    require(!row.fail() && comma1 == ',' && comma2 == ',',
            ErrorCode::kFileFormat, "bad confusion CSV row: " + line);
    require(t >= 0 && t < classes && p >= 0 && p < classes,
            ErrorCode::kFileFormat,
            "confusion CSV class index out of range: " + line);
    require(count >= 0, ErrorCode::kFileFormat,
            "negative count in confusion CSV: " + line);
    cm.counts(t, p) += count;
  }
  return cm;
}

json bench_to_json(const BenchReport& report) {
  json out;
  out["canonical"] = {{"method", report.method},
                      {"repetitions", report.repetitions},
                      {"pairs", report.pairs},
                      {"num_clusters", report.params.num_clusters},
                      {"refine_iters", report.params.refine_iters},
                      {"top_k", report.params.top_k},
                      {"fraction", report.fraction},
                      {"n_min", report.n_min},
                      {"n_max", report.n_max},
                      {"n_mean", report.n_mean}};
  // Wall-clock results live apart from the canonical body so determinism
  // checks can ignore them.
  out["timing"] = {{"mean_seconds_per_sample", report.mean_seconds_per_sample},
                   {"std_seconds_per_sample", report.std_seconds_per_sample}};
  return out;
}

}  // namespace sevmil
