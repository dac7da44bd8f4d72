#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/metrics.hpp"
#include "sevmil/synth.hpp"
#include "sevmil/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace sevmil {

// Declarative experiment description: hierarchy, data generator, training
// setup and metric settings. Parsing is strict (unknown keys are rejected)
// and the hierarchy is validated before anything runs. Serialization is
// canonical, so parse -> serialize -> parse is the identity.
struct ExperimentConfig {
  Hierarchy hierarchy;
  SynthSpec synth;
  TrainConfig train;
  double metric_penalty = 2.0;
  RiskSevereFactor risk_factor = RiskSevereFactor::kHalveSevere;
  std::string output_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& root);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical serialization; stored in checkpoints.
std::uint64_t config_hash(const ExperimentConfig& config);

// --- report and confusion-matrix serialization -----------------------------

nlohmann::json report_to_json(const MetricReport& report);
nlohmann::json reports_to_json(const std::vector<MetricReport>& reports);

// "level,metric,value" rows, one per level per metric.
std::string reports_to_csv(const std::vector<MetricReport>& reports);

// Header "true,pred,count", one row per non-zero cell.
std::string confusion_to_csv(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_csv(const std::string& text, Index level,
                                   Index classes);

nlohmann::json bench_to_json(const BenchReport& report);

}  // namespace sevmil
