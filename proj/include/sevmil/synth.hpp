#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/remix.hpp"
#include "sevmil/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sevmil {

// Gaussian-mixture stand-in for extracted WSI features: every finest class
// has a center, bags of class c mix center-c instances with background and
// strictly-less-urgent filler so the bag label is the most urgent instance
// class present. Per-instance truth makes remix selection quality
// measurable.
struct SynthSpec {
  Index feature_dim = 16;
  Index min_instances = 16;
  Index max_instances = 64;
  std::vector<VectorX> class_centers;  // one per finest class
  VectorX background_center;           // zero vector of feature_dim if empty
  double noise_sigma = 0.5;
  double background_fraction = 0.3;
  double target_fraction_min = 0.3;  // share of instances from the bag's class
  double target_fraction_max = 0.7;
  Index bags_per_class = 100;
  std::uint64_t seed = 0;
};

// Deterministic per seed; bags use independently derived per-bag seeds so
// generation order (and threading) cannot change the output.
std::vector<Bag> generate(const SynthSpec& spec, const Hierarchy& h,
                          int threads = 1);

// Bag feature file: "MILB", u32 version (= 1), u32 n, u32 d, then n*d
// IEEE-754 little-endian f32, row-major. Exactly 16 + 4*n*d bytes.
inline constexpr std::uint32_t kBagFormatVersion = 1;

void write_bag(const Bag& bag, const std::string& path);

// Reads features only; id is the file stem and labels stay empty. Labels
// travel in the dataset manifest.
Bag read_bag(const std::string& path);

// Writes <dir>/<id>.milb per bag plus <dir>/manifest.json with ids, labels,
// optional instance labels and relative paths.
void save_dataset(const std::vector<Bag>& bags, const std::string& dir);

// Loads a manifest and its bag files, validating every bag's labels against
// the hierarchy (level count, index ranges, parent consistency).
std::vector<Bag> load_dataset(const std::string& manifest_path,
                              const Hierarchy& h);

}  // namespace sevmil
