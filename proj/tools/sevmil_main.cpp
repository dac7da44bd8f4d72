#include "sevmil/config.hpp"
#include "sevmil/error.hpp"
#include "sevmil/logging.hpp"
#include "sevmil/parallel.hpp"
#include "sevmil/synth.hpp"
#include "sevmil/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
  std::string format = "json";
};

sevmil::ExperimentConfig load_effective_config(const GlobalOptions& opts) {
  sevmil::require(!opts.config_path.empty(), sevmil::ErrorCode::kInvalidConfig,
                  "--config is required");
  sevmil::ExperimentConfig config = sevmil::load_config(opts.config_path);
  if (opts.seed.has_value()) {
    config.synth.seed = *opts.seed;
    config.train.seed = *opts.seed;
  }
  if (!opts.out_dir.empty()) config.output_dir = opts.out_dir;
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  sevmil::require(out.good(), sevmil::ErrorCode::kFileFormat,
                  "cannot write " + path.string());
  out << text;
  sevmil::require(out.good(), sevmil::ErrorCode::kFileFormat,
                  "write failed: " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  sevmil::require(in.good(), sevmil::ErrorCode::kFileFormat,
                  "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<sevmil::Bag> dataset_for(const sevmil::ExperimentConfig& config,
                                     const std::string& data_manifest,
                                     int threads) {
  if (!data_manifest.empty())
    return sevmil::load_dataset(data_manifest, config.hierarchy);
  sevmil::log_info("generating dataset from config synth block");
  return sevmil::generate(config.synth, config.hierarchy, threads);
}

void emit_reports(const sevmil::ExperimentConfig& config,
                  const std::vector<sevmil::MetricReport>& reports,
                  const std::string& format, const std::string& stem) {
  const fs::path dir(config.output_dir);
  const json body = sevmil::reports_to_json(reports);
  write_text(dir / (stem + ".json"), body.dump(2) + "\n");
  if (format == "csv")
    write_text(dir / (stem + ".csv"), sevmil::reports_to_csv(reports));
  std::cout << body.dump(2) << "\n";
}

int cmd_gen(const GlobalOptions& opts) {
  const auto config = load_effective_config(opts);
  const auto bags =
      sevmil::generate(config.synth, config.hierarchy, opts.threads);
  const fs::path dir = fs::path(config.output_dir) / "dataset";
  sevmil::log_info("writing " + std::to_string(bags.size()) + " bags to " +
                   dir.string());
  sevmil::save_dataset(bags, dir.string());
  json summary;
  summary["bags"] = bags.size();
  summary["manifest"] = (dir / "manifest.json").string();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const GlobalOptions& opts, const std::string& data_manifest) {
  const auto config = load_effective_config(opts);
  const auto dataset = dataset_for(config, data_manifest, opts.threads);
  const auto result = sevmil::train(dataset, config.hierarchy, config.train);

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  sevmil::save_checkpoint(result.model, sevmil::config_hash(config),
                          (dir / "checkpoint.milc").string());
  sevmil::write_trace_csv(result.trace, (dir / "trace.csv").string());

  json summary;
  summary["checkpoint"] = (dir / "checkpoint.milc").string();
  summary["trace"] = (dir / "trace.csv").string();
  summary["epochs"] = result.trace.size();
  if (!result.trace.empty()) {
    summary["final_loss"] = result.trace.back().loss;
    sevmil::Index fallbacks = 0;
    for (const auto& t : result.trace) fallbacks += t.remix_fallbacks;
    summary["remix_fallbacks"] = fallbacks;
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const GlobalOptions& opts, const std::string& checkpoint,
             const std::string& data_manifest) {
  const auto config = load_effective_config(opts);
  std::uint64_t stored_hash = 0;
  const auto model = sevmil::load_checkpoint(checkpoint, &stored_hash);
  if (stored_hash != sevmil::config_hash(config))
    sevmil::log_warn("checkpoint was produced under a different config");
  const auto dataset = dataset_for(config, data_manifest, opts.threads);
  const auto eval = sevmil::evaluate(model, dataset, config.hierarchy,
                                     config.metric_penalty, config.risk_factor);

  const fs::path dir(config.output_dir);
  for (const auto& cm : eval.confusion)
    write_text(dir / ("confusion_level" + std::to_string(cm.level) + ".csv"),
               sevmil::confusion_to_csv(cm));
  emit_reports(config, eval.reports, opts.format, "report");
  return 0;
}

int cmd_remix(const GlobalOptions& opts, const std::string& bag_a_path,
              const std::string& bag_b_path, const std::string& method,
              sevmil::Index label_a, sevmil::Index label_b, double fraction) {
  const auto config = load_effective_config(opts);
  const sevmil::Hierarchy& h = config.hierarchy;

  auto load_labeled = [&](const std::string& path, sevmil::Index finest_label) {
    sevmil::Bag bag = sevmil::read_bag(path);
    sevmil::require(finest_label >= 0 &&
                        finest_label < h.num_classes(h.finest_level()),
                    sevmil::ErrorCode::kPrecondition,
                    "finest-level label out of range");
    bag.labels.assign(static_cast<std::size_t>(h.num_levels()), 0);
    sevmil::Index node = finest_label;
    for (sevmil::Index lvl = h.finest_level(); lvl >= 0; --lvl) {
      bag.labels[static_cast<std::size_t>(lvl)] = node;
      if (lvl > 0) node = h.parent(lvl, node);
    }
    return bag;
  };
  const sevmil::Bag bag_a = load_labeled(bag_a_path, label_a);
  const sevmil::Bag bag_b = load_labeled(bag_b_path, label_b);

  sevmil::RemixResult result;
  sevmil::SfrParams params = config.train.sfr;
  params.seed = opts.seed.value_or(config.train.seed);
  if (method == "sfr") {
    result = sevmil::sfr(bag_a, bag_b, h, params, opts.threads);
  } else if (method == "random_mix") {
    result = sevmil::random_mix(bag_a, bag_b, h, fraction, params.seed);
  } else {
    throw sevmil::Error(sevmil::ErrorCode::kInvalidConfig,
                        "method must be sfr or random_mix");
  }

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  sevmil::write_bag(result.bag, (dir / "remixed.milb").string());

  json log;
  log["method"] = method;
  log["bag_a"] = bag_a_path;
  log["bag_b"] = bag_b_path;
  log["labels"] = result.bag.labels;
  log["selected_from_a"] = result.selected_from_a;
  log["output_size"] = result.bag.size();
  if (method == "sfr") {
    log["cluster_order"] = result.cluster_order;
    log["cluster_of"] = result.cluster_of;
    log["zero_norm_flagged"] = result.zero_norm_flagged;
    log["params"] = {{"num_clusters", params.num_clusters},
                     {"refine_iters", params.refine_iters},
                     {"top_k", params.top_k}};
  } else {
    log["fraction"] = fraction;
  }
  write_text(dir / "selection_log.json", log.dump(2) + "\n");
  std::cout << log.dump(2) << "\n";
  return 0;
}

int cmd_bench(const GlobalOptions& opts, const std::string& method, int reps,
              double fraction) {
  const auto config = load_effective_config(opts);
  const auto corpus =
      sevmil::generate(config.synth, config.hierarchy, opts.threads);
  const sevmil::RemixMethod kind = method == "sfr"
                                       ? sevmil::RemixMethod::kSfr
                                       : sevmil::RemixMethod::kRandomMix;
  if (method != "sfr" && method != "random_mix")
    throw sevmil::Error(sevmil::ErrorCode::kInvalidConfig,
                        "method must be sfr or random_mix");
  sevmil::SfrParams params = config.train.sfr;
  params.seed = opts.seed.value_or(config.train.seed);
  const auto report = sevmil::bench_remix(corpus, kind, params, fraction, reps,
                                          config.hierarchy, opts.threads);
  const json body = sevmil::bench_to_json(report);
  write_text(fs::path(config.output_dir) / "bench.json", body.dump(2) + "\n");
  std::cout << body.dump(2) << "\n";
  return 0;
}

int cmd_metrics(const GlobalOptions& opts, const std::string& confusion_csv,
                sevmil::Index level, double penalty_override) {
  auto config = load_effective_config(opts);
  const sevmil::Hierarchy& h = config.hierarchy;
  if (level < 0) level = h.finest_level();
  sevmil::require(level < h.num_levels(), sevmil::ErrorCode::kPrecondition,
                  "level out of range");
  const double penalty =
      penalty_override >= 0.0 ? penalty_override : config.metric_penalty;

  const auto cm = sevmil::confusion_from_csv(read_text(confusion_csv), level,
                                             h.num_classes(level));
  const auto report =
      sevmil::report_from_confusion(cm, h, penalty, config.risk_factor);
  emit_reports(config, {report}, opts.format, "metrics_report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Severity-aware multiple-instance-learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "experiment config file");
  app.add_option("--seed", opts.seed, "seed override for data and training");
  app.add_option("--out", opts.out_dir, "output directory override");
  app.add_option("--threads", opts.threads, "worker threads (0 = auto)");
  app.add_option("--format", opts.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");

  std::string data_manifest;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data_manifest,
                    "dataset manifest (default: generate from config)");

  std::string checkpoint;
  std::string eval_manifest;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--data", eval_manifest,
                   "dataset manifest (default: generate from config)");

  std::string bag_a_path, bag_b_path, remix_method = "sfr";
  sevmil::Index label_a = -1, label_b = -1;
  double remix_fraction = 0.5;
  auto* remix = app.add_subcommand("remix", "remix two bags");
  remix->add_option("--bag-a", bag_a_path, "more urgent donor bag file")
      ->required();
  remix->add_option("--bag-b", bag_b_path, "less urgent recipient bag file")
      ->required();
  remix->add_option("--method", remix_method, "sfr or random_mix");
  remix->add_option("--label-a", label_a, "donor finest-level class index")
      ->required();
  remix->add_option("--label-b", label_b, "recipient finest-level class index")
      ->required();
  remix->add_option("--fraction", remix_fraction,
                    "sample fraction for random_mix");

  std::string bench_method = "sfr";
  int bench_reps = 1;
  double bench_fraction = 0.5;
  auto* bench = app.add_subcommand("bench", "micro-benchmark remix methods");
  bench->add_option("--method", bench_method, "sfr or random_mix");
  bench->add_option("--reps", bench_reps, "timed passes over the pair list");
  bench->add_option("--fraction", bench_fraction,
                    "sample fraction for random_mix");

  std::string confusion_csv;
  sevmil::Index metrics_level = -1;
  double metrics_penalty = -1.0;
  auto* metrics =
      app.add_subcommand("metrics", "score an external confusion matrix");
  metrics->add_option("--confusion", confusion_csv, "confusion CSV file")
      ->required();
  metrics->add_option("--level", metrics_level,
                      "hierarchy level of the matrix (default: finest)");
  metrics->add_option("--penalty", metrics_penalty,
                      "severe-direction penalty P (default: config value)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(opts);
    if (train->parsed()) return cmd_train(opts, data_manifest);
    if (eval->parsed()) return cmd_eval(opts, checkpoint, eval_manifest);
    if (remix->parsed())
      return cmd_remix(opts, bag_a_path, bag_b_path, remix_method, label_a,
                       label_b, remix_fraction);
    if (bench->parsed())
      return cmd_bench(opts, bench_method, bench_reps, bench_fraction);
    if (metrics->parsed())
      return cmd_metrics(opts, confusion_csv, metrics_level, metrics_penalty);
  } catch (const sevmil::Error& e) {
    json err;
    err["error"] = {{"code", e.code_name()}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return e.exit_status();
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"code", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 1;
}
