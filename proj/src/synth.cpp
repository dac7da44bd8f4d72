#include "sevmil/synth.hpp"

#include "sevmil/error.hpp"
#include "sevmil/parallel.hpp"
#include "sevmil/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sevmil {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_spec(const SynthSpec& spec, const Hierarchy& h) {
  require(spec.feature_dim >= 1, ErrorCode::kPrecondition,
          "feature_dim must be >= 1");
  require(spec.min_instances >= 1 &&
              spec.max_instances >= spec.min_instances,
          ErrorCode::kPrecondition, "bad instances_per_bag range");
  require(spec.noise_sigma > 0.0, ErrorCode::kPrecondition,
          "noise_sigma must be > 0");
  require(spec.background_fraction >= 0.0 && spec.background_fraction <= 1.0,
          ErrorCode::kPrecondition, "background_fraction must be in [0, 1]");
  require(spec.target_fraction_min > 0.0 &&
              spec.target_fraction_min <= spec.target_fraction_max &&
              spec.target_fraction_max <= 1.0,
          ErrorCode::kPrecondition, "bad target fraction range");
  require(spec.bags_per_class >= 1, ErrorCode::kPrecondition,
          "bags_per_class must be >= 1");
  const Index classes = h.num_classes(h.finest_level());
  require(static_cast<Index>(spec.class_centers.size()) == classes,
          ErrorCode::kPrecondition,
          "need one class center per finest class");
  for (const auto& c : spec.class_centers)
    require(c.size() == spec.feature_dim, ErrorCode::kPrecondition,
            "class center dimension mismatch");
  for (std::size_t i = 0; i < spec.class_centers.size(); ++i)
    for (std::size_t j = i + 1; j < spec.class_centers.size(); ++j)
      require((spec.class_centers[i] - spec.class_centers[j]).norm() > 0.0,
              ErrorCode::kPrecondition, "class centers must be distinct");
  if (spec.background_center.size() != 0)
    require(spec.background_center.size() == spec.feature_dim,
            ErrorCode::kPrecondition, "background center dimension mismatch");
}

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<Bag> generate(const SynthSpec& spec, const Hierarchy& h,
                          int threads) {
  check_spec(spec, h);
  const Index finest = h.finest_level();
  const Index classes = h.num_classes(finest);
  VectorX background = spec.background_center;
  if (background.size() == 0) background = VectorX::Zero(spec.feature_dim);

  const Index total_bags = classes * spec.bags_per_class;
  std::vector<Bag> bags(static_cast<std::size_t>(total_bags));

  parallel_for(total_bags, threads, [&](long bi) {
    const auto bag_index = static_cast<Index>(bi);
    const Index target = bag_index / spec.bags_per_class;
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(bag_index)));

    const Index n = rng.next_int(static_cast<int>(spec.min_instances),
                                 static_cast<int>(spec.max_instances));
    const double share = rng.next_uniform(spec.target_fraction_min,
                                          spec.target_fraction_max);
    const Index n_target = std::max<Index>(
        1, static_cast<Index>(std::lround(share * static_cast<double>(n))));

    std::vector<Index> lower;  // classes strictly less urgent than target
    for (Index c = 0; c < classes; ++c)
      if (h.more_urgent(finest, target, c)) lower.push_back(c);

    // -1 marks background instances in the per-instance truth.
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      if (i < n_target) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(target);
      } else if (lower.empty() ||
                 rng.next_double() < spec.background_fraction) {
        labels[static_cast<std::size_t>(i)] = -1;
      } else {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(
            lower[static_cast<std::size_t>(rng.next_below(lower.size()))]);
      }
    }
    rng.shuffle(labels);

    Bag& bag = bags[static_cast<std::size_t>(bag_index)];
    std::ostringstream name;
    name << "bag-" << bag_index;
    bag.id = name.str();
    bag.instance_labels = labels;
    bag.instances.resize(n, spec.feature_dim);
    for (Index i = 0; i < n; ++i) {
      const int lab = labels[static_cast<std::size_t>(i)];
      const VectorX& center =
          lab < 0 ? background
                  : spec.class_centers[static_cast<std::size_t>(lab)];
      for (Index j = 0; j < spec.feature_dim; ++j)
        bag.instances(i, j) = static_cast<float>(
            center[j] + spec.noise_sigma * rng.next_gaussian());
    }

    // Bag label: the target class (the most urgent one present) aggregated
    // upward through the parent map.
    bag.labels.assign(static_cast<std::size_t>(h.num_levels()), 0);
    Index node = target;
    for (Index lvl = finest; lvl >= 0; --lvl) {
      bag.labels[static_cast<std::size_t>(lvl)] = node;
      if (lvl > 0) node = h.parent(lvl, node);
    }
  });
  return bags;
}

void write_bag(const Bag& bag, const std::string& path) {
  require(bag.size() >= 1, ErrorCode::kPrecondition, "empty bag");
  std::string buffer;
  const auto n = static_cast<std::uint32_t>(bag.size());
  const auto d = static_cast<std::uint32_t>(bag.dim());
  buffer.reserve(16 + 4ull * n * d);
  buffer.append("MILB", 4);
  append_u32_le(buffer, kBagFormatVersion);
  append_u32_le(buffer, n);
  append_u32_le(buffer, d);
  // Row-major f32 payload; the host is little-endian, matching the format.
  static_assert(sizeof(float) == 4);
  buffer.append(reinterpret_cast<const char*>(bag.instances.data()),
                4ull * n * d);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kFileFormat, "cannot open for write: " + path);
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  require(out.good(), ErrorCode::kFileFormat, "write failed: " + path);
}

Bag read_bag(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kFileFormat, "cannot open: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  require(data.size() >= 16, ErrorCode::kTruncatedFile,
          "truncated file (shorter than header): " + path);
  require(data.compare(0, 4, "MILB") == 0, ErrorCode::kMagicMismatch,
          "magic mismatch (not a bag file): " + path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  const std::uint32_t version = read_u32_le(bytes + 4);
  require(version == kBagFormatVersion, ErrorCode::kUnsupportedVersion,
          "unsupported bag format version " + std::to_string(version));
  const std::uint32_t n = read_u32_le(bytes + 8);
  const std::uint32_t d = read_u32_le(bytes + 12);
  const std::uint64_t expected = 16 + 4ull * n * d;
  require(data.size() >= expected, ErrorCode::kTruncatedFile,
          "truncated file: " + path);
  require(data.size() == expected, ErrorCode::kFileFormat,
          "trailing bytes after payload: " + path);
  require(n >= 1 && d >= 1, ErrorCode::kFileFormat,
          "degenerate bag dimensions: " + path);

  Bag bag;
  bag.id = fs::path(path).stem().string();
  bag.instances.resize(static_cast<Index>(n), static_cast<Index>(d));
  std::memcpy(bag.instances.data(), data.data() + 16, 4ull * n * d);
  return bag;
}

void save_dataset(const std::vector<Bag>& bags, const std::string& dir) {
  require(!bags.empty(), ErrorCode::kPrecondition, "no bags to save");
  fs::create_directories(dir);
  json manifest = json::array();
  for (const Bag& bag : bags) {
    const std::string file = bag.id + ".milb";
    write_bag(bag, (fs::path(dir) / file).string());
    json entry;
    entry["id"] = bag.id;
    entry["labels"] = bag.labels;
    entry["path"] = file;
    if (!bag.instance_labels.empty())
      entry["instance_labels"] = bag.instance_labels;
    manifest.push_back(entry);
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  require(out.good(), ErrorCode::kFileFormat, "cannot write manifest");
  out << manifest.dump(2) << "\n";
}

std::vector<Bag> load_dataset(const std::string& manifest_path,
                              const Hierarchy& h) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::kFileFormat,
          "cannot open manifest: " + manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFileFormat,
                std::string("manifest parse error: ") + e.what());
  }
  require(manifest.is_array(), ErrorCode::kFileFormat,
          "manifest must be a JSON array");

  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<Bag> bags;
  bags.reserve(manifest.size());
  for (const auto& entry : manifest) {
    require(entry.contains("id") && entry.contains("labels") &&
                entry.contains("path"),
            ErrorCode::kFileFormat, "manifest entry missing id/labels/path");
    Bag bag = read_bag((base / entry["path"].get<std::string>()).string());
    bag.id = entry["id"].get<std::string>();
    bag.labels = entry["labels"].get<std::vector<Index>>();
    if (entry.contains("instance_labels"))
      bag.instance_labels = entry["instance_labels"].get<std::vector<int>>();

    // Labels must name a valid class per level and agree with the parent map.
    require(static_cast<Index>(bag.labels.size()) == h.num_levels(),
            ErrorCode::kManifestMismatch,
            "bag " + bag.id + ": label count does not match hierarchy");
    for (Index lvl = 0; lvl < h.num_levels(); ++lvl) {
      const Index label = bag.labels[static_cast<std::size_t>(lvl)];
      require(label >= 0 && label < h.num_classes(lvl),
              ErrorCode::kManifestMismatch,
              "bag " + bag.id + ": label out of range");
      if (lvl >= 1)
        require(h.parent(lvl, label) ==
                    bag.labels[static_cast<std::size_t>(lvl - 1)],
                ErrorCode::kManifestMismatch,
                "bag " + bag.id + ": labels inconsistent with parent map");
    }
    if (!bag.instance_labels.empty())
      require(static_cast<Index>(bag.instance_labels.size()) == bag.size(),
              ErrorCode::kManifestMismatch,
              "bag " + bag.id + ": instance label count mismatch");
    bags.push_back(std::move(bag));
  }
  return bags;
}

}  // namespace sevmil
