#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sevmil {

// An instance bag: one feature row per instance, one label per hierarchy
// level. instance_labels carries per-instance ground truth on synthetic
// data (-1 marks background instances); it is empty when unknown.
struct Bag {
  std::string id;
  FeatureMatrix instances;
  std::vector<Index> labels;
  std::vector<int> instance_labels;

  Index size() const { return instances.rows(); }
  Index dim() const { return instances.cols(); }
};

struct SfrParams {
  Index num_clusters = 11;  // L >= 2
  Index refine_iters = 6;   // T >= 0
  Index top_k = 6;          // 1 <= k < L
  std::uint64_t seed = 0;
  // Reassign by lowest prototype similarity instead of highest; audit-only.
  bool literal_argmin = false;
};

// Remix output plus enough trace to audit which donor instances were taken.
struct RemixResult {
  Bag bag;
  std::vector<Index> selected_from_a;  // ascending, unique indices into bag_a
  std::vector<Index> cluster_of;       // final cluster per instance, a rows then b rows
  std::vector<Index> cluster_order;    // clusters sorted by donor proportion
  bool zero_norm_flagged = false;
};

// Semantic feature remix: clusters the union of both bags by cosine
// similarity, sorts clusters by the fraction of members coming from the
// more urgent bag, and merges that bag's instances from the top-k clusters
// into the less urgent bag. The result carries bag_a's labels.
// Requires bag_a's finest label strictly more urgent than bag_b's.
RemixResult sfr(const Bag& bag_a, const Bag& bag_b, const Hierarchy& h,
                const SfrParams& params, int threads = 1);

// Baseline: merge a uniform sample (without replacement) of
// ceil(fraction * n_a) donor instances into bag_b.
RemixResult random_mix(const Bag& bag_a, const Bag& bag_b, const Hierarchy& h,
                       double fraction, std::uint64_t seed);

enum class RemixMethod { kSfr, kRandomMix };

inline const char* remix_method_name(RemixMethod m) {
  return m == RemixMethod::kSfr ? "sfr" : "random_mix";
}

struct BenchReport {
  std::string method;
  int repetitions = 0;
  Index pairs = 0;
  SfrParams params;
  double fraction = 0.0;  // random_mix only
  Index n_min = 0;
  Index n_max = 0;
  double n_mean = 0.0;
  double mean_seconds_per_sample = 0.0;
  double std_seconds_per_sample = 0.0;
};

// Times one remix invocation per valid (donor, recipient) pair, repeated
// `repetitions` times; mean/std are per-invocation over repetitions.
BenchReport bench_remix(const std::vector<Bag>& corpus, RemixMethod method,
                        const SfrParams& params, double fraction,
                        int repetitions, const Hierarchy& h, int threads = 1);

}  // namespace sevmil
