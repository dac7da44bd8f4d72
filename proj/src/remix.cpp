#include "sevmil/remix.hpp"

#include "sevmil/error.hpp"
#include "sevmil/logging.hpp"
#include "sevmil/parallel.hpp"
#include "sevmil/rng.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace sevmil {
namespace {

void check_pair(const Bag& bag_a, const Bag& bag_b, const Hierarchy& h) {
  require(bag_a.size() >= 1 && bag_b.size() >= 1, ErrorCode::kPrecondition,
          "bags must be non-empty");
  require(bag_a.dim() == bag_b.dim(), ErrorCode::kPrecondition,
          "feature dimension mismatch between bags");
  const auto levels = static_cast<std::size_t>(h.num_levels());
  require(bag_a.labels.size() == levels && bag_b.labels.size() == levels,
          ErrorCode::kPrecondition, "bag labels do not match hierarchy");
  const Index finest = h.finest_level();
  require(h.more_urgent(finest, bag_a.labels[static_cast<std::size_t>(finest)],
                        bag_b.labels[static_cast<std::size_t>(finest)]),
          ErrorCode::kPrecondition,
          "bag_a must be strictly more urgent than bag_b at the finest level");
}

// Similarity bin for the initialization step: bins are closed at the top so
// exact boundary values fall into the lower bin, and s = 1 lands in the last
// bin.
Index bin_of(double s, Index clusters) {
  const double raw = std::ceil((s + 1.0) * static_cast<double>(clusters) / 2.0);
  auto idx = static_cast<Index>(raw) - 1;
  return std::clamp<Index>(idx, 0, clusters - 1);
}

Bag assemble(const Bag& bag_a, const Bag& bag_b,
             const std::vector<Index>& selected_from_a) {
  Bag out;
  out.id = bag_a.id + "+" + bag_b.id;
  out.labels = bag_a.labels;
  const Index n_b = bag_b.size();
  const auto n_sel = static_cast<Index>(selected_from_a.size());
  out.instances.resize(n_b + n_sel, bag_b.dim());
  out.instances.topRows(n_b) = bag_b.instances;
  for (Index i = 0; i < n_sel; ++i)
    out.instances.row(n_b + i) =
        bag_a.instances.row(selected_from_a[static_cast<std::size_t>(i)]);
  if (!bag_a.instance_labels.empty() && !bag_b.instance_labels.empty()) {
    out.instance_labels = bag_b.instance_labels;
    for (const Index i : selected_from_a)
      out.instance_labels.push_back(
          bag_a.instance_labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

RemixResult sfr(const Bag& bag_a, const Bag& bag_b, const Hierarchy& h,
                const SfrParams& params, int threads) {
  check_pair(bag_a, bag_b, h);
  const Index clusters = params.num_clusters;
  require(clusters >= 2, ErrorCode::kPrecondition, "need at least 2 clusters");
  require(params.refine_iters >= 0, ErrorCode::kPrecondition,
          "refinement iterations must be >= 0");
  require(params.top_k >= 1 && params.top_k < clusters,
          ErrorCode::kPrecondition, "top_k must satisfy 1 <= k < L");

  const Index n_a = bag_a.size();
  const Index n = n_a + bag_b.size();
  const Index dim = bag_a.dim();
  auto row = [&](Index i) {
    return i < n_a ? bag_a.instances.row(i) : bag_b.instances.row(i - n_a);
  };

  RemixResult result;

  // Clustering works on directions: every instance is unit-normalized up
  // front, which keeps assignments invariant to per-instance scaling, and
  // prototypes are means of member directions.
  MatrixX unit(n, dim);
  std::vector<char> zero_norm(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](long li) {
    const auto i = static_cast<Index>(li);
    const VectorX z = row(i).cast<double>().transpose();
    const double norm = z.norm();
    if (norm == 0.0) {
      zero_norm[static_cast<std::size_t>(i)] = 1;
      unit.row(i).setZero();
    } else {
      unit.row(i) = z.transpose() / norm;
    }
  });

  // 1. Initialization: bin every instance by cosine similarity to the
  // global mean direction of both bags. If the directions cancel exactly,
  // the first non-degenerate instance serves as the reference.
  VectorX reference = VectorX::Zero(dim);
  for (Index i = 0; i < n; ++i) reference += unit.row(i).transpose();
  reference /= static_cast<double>(n);
  if (reference.norm() == 0.0) {
    for (Index i = 0; i < n; ++i) {
      if (!zero_norm[static_cast<std::size_t>(i)]) {
        reference = unit.row(i).transpose();
        break;
      }
    }
  }
  const double reference_norm = reference.norm();

  std::vector<Index> cluster_of(static_cast<std::size_t>(n));
  std::vector<char> frozen(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](long li) {
    const auto i = static_cast<Index>(li);
    const std::size_t ui = static_cast<std::size_t>(i);
    if (zero_norm[ui] || reference_norm == 0.0) {
      // Cosine undefined: park the instance in the reference's own bin
      // (similarity 1 with itself) and stop moving it.
      cluster_of[ui] = bin_of(1.0, clusters);
      frozen[ui] = 1;
      return;
    }
    const double s = reference.dot(unit.row(i)) / reference_norm;
    cluster_of[ui] = bin_of(s, clusters);
  });
  result.zero_norm_flagged =
      std::any_of(zero_norm.begin(), zero_norm.end(),
                  [](char f) { return f != 0; });

  // 2. Refinement: recompute non-empty prototypes, reassign by prototype
  // similarity. Empty clusters keep their previous prototype.
  MatrixX prototypes = MatrixX::Zero(clusters, dim);
  std::vector<double> proto_norm(static_cast<std::size_t>(clusters), 0.0);
  std::vector<char> has_proto(static_cast<std::size_t>(clusters), 0);
  std::vector<Index> members(static_cast<std::size_t>(clusters));
  for (Index iter = 0; iter < params.refine_iters; ++iter) {
    MatrixX sums = MatrixX::Zero(clusters, dim);
    std::fill(members.begin(), members.end(), Index{0});
    for (Index i = 0; i < n; ++i) {
      const Index l = cluster_of[static_cast<std::size_t>(i)];
      sums.row(l) += unit.row(i);
      ++members[static_cast<std::size_t>(l)];
    }
    for (Index l = 0; l < clusters; ++l) {
      if (members[static_cast<std::size_t>(l)] == 0) continue;
      prototypes.row(l) =
          sums.row(l) / static_cast<double>(members[static_cast<std::size_t>(l)]);
      proto_norm[static_cast<std::size_t>(l)] = prototypes.row(l).norm();
      has_proto[static_cast<std::size_t>(l)] = 1;
    }

    parallel_for(n, threads, [&](long li) {
      const auto i = static_cast<Index>(li);
      const std::size_t ui = static_cast<std::size_t>(i);
      if (frozen[ui]) return;
      Index best = -1;
      double best_sim = 0.0;
      for (Index l = 0; l < clusters; ++l) {
        if (!has_proto[static_cast<std::size_t>(l)]) continue;
        const double pn = proto_norm[static_cast<std::size_t>(l)];
        const double sim =
            pn == 0.0 ? 0.0 : prototypes.row(l).dot(unit.row(i)) / pn;
        const bool better = params.literal_argmin ? sim < best_sim : sim > best_sim;
        if (best < 0 || better) {
          best = l;
          best_sim = sim;
        }
      }
      if (best >= 0) cluster_of[ui] = best;
    });
  }

  // 3. Remix: order clusters by donor proportion (ties to the lower index)
  // and take the donor's instances from the top-k clusters.
  std::vector<Index> total(static_cast<std::size_t>(clusters), 0);
  std::vector<Index> from_a(static_cast<std::size_t>(clusters), 0);
  for (Index i = 0; i < n; ++i) {
    const std::size_t l = static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)]);
    ++total[l];
    if (i < n_a) ++from_a[l];
  }
  std::vector<double> proportion(static_cast<std::size_t>(clusters), -1.0);
  for (Index l = 0; l < clusters; ++l)
    if (total[static_cast<std::size_t>(l)] > 0)
      proportion[static_cast<std::size_t>(l)] =
          static_cast<double>(from_a[static_cast<std::size_t>(l)]) /
          static_cast<double>(total[static_cast<std::size_t>(l)]);

  result.cluster_order.resize(static_cast<std::size_t>(clusters));
  std::iota(result.cluster_order.begin(), result.cluster_order.end(), Index{0});
  std::sort(result.cluster_order.begin(), result.cluster_order.end(),
            [&](Index x, Index y) {
              const double px = proportion[static_cast<std::size_t>(x)];
              const double py = proportion[static_cast<std::size_t>(y)];
              return px != py ? px > py : x < y;
            });

  std::vector<char> take(static_cast<std::size_t>(clusters), 0);
  for (Index r = 0; r < params.top_k; ++r)
    take[static_cast<std::size_t>(result.cluster_order[static_cast<std::size_t>(r)])] = 1;
  for (Index i = 0; i < n_a; ++i)
    if (take[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)])])
      result.selected_from_a.push_back(i);

  result.cluster_of = std::move(cluster_of);
  result.bag = assemble(bag_a, bag_b, result.selected_from_a);
  return result;
}

RemixResult random_mix(const Bag& bag_a, const Bag& bag_b, const Hierarchy& h,
                       double fraction, std::uint64_t seed) {
  check_pair(bag_a, bag_b, h);
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::kPrecondition,
          "fraction must lie in (0, 1]");
  const Index n_a = bag_a.size();
  const auto count = static_cast<Index>(
      std::ceil(fraction * static_cast<double>(n_a)));
  Rng rng(seed);
  RemixResult result;
  result.selected_from_a = rng.sample_without_replacement(n_a, count);
  result.bag = assemble(bag_a, bag_b, result.selected_from_a);
  return result;
}

BenchReport bench_remix(const std::vector<Bag>& corpus, RemixMethod method,
                        const SfrParams& params, double fraction,
                        int repetitions, const Hierarchy& h, int threads) {
  require(!corpus.empty(), ErrorCode::kPrecondition, "empty corpus");
  require(repetitions >= 1, ErrorCode::kPrecondition,
          "repetitions must be >= 1");
  const Index finest = h.finest_level();

  // One invocation per recipient with its first strictly-more-urgent donor.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t recipient = 0; recipient < corpus.size(); ++recipient) {
    for (std::size_t donor = 0; donor < corpus.size(); ++donor) {
      if (donor == recipient) continue;
      if (h.more_urgent(
              finest,
              corpus[donor].labels[static_cast<std::size_t>(finest)],
              corpus[recipient].labels[static_cast<std::size_t>(finest)])) {
        pairs.emplace_back(donor, recipient);
        break;
      }
    }
  }
  require(!pairs.empty(), ErrorCode::kPrecondition,
          "corpus has no valid priority pair");

  std::vector<double> per_sample(static_cast<std::size_t>(repetitions));
  std::size_t sink = 0;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    for (const auto& [donor, recipient] : pairs) {
      const RemixResult r =
          method == RemixMethod::kSfr
              ? sfr(corpus[donor], corpus[recipient], h, params, threads)
              : random_mix(corpus[donor], corpus[recipient], h, fraction,
                           mix_seed(params.seed, rep));
      sink += static_cast<std::size_t>(r.bag.size());
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    per_sample[static_cast<std::size_t>(rep)] =
        elapsed.count() / static_cast<double>(pairs.size());
  }
  log_debug("bench sink " + std::to_string(sink));

  BenchReport report;
  report.method = remix_method_name(method);
  report.repetitions = repetitions;
  report.pairs = static_cast<Index>(pairs.size());
  report.params = params;
  report.fraction = fraction;
  report.n_min = corpus.front().size();
  report.n_max = corpus.front().size();
  double n_sum = 0.0;
  for (const Bag& bag : corpus) {
    report.n_min = std::min(report.n_min, bag.size());
    report.n_max = std::max(report.n_max, bag.size());
    n_sum += static_cast<double>(bag.size());
  }
  report.n_mean = n_sum / static_cast<double>(corpus.size());

  const double mean =
      std::accumulate(per_sample.begin(), per_sample.end(), 0.0) /
      static_cast<double>(repetitions);
  double var = 0.0;
  for (const double x : per_sample) var += (x - mean) * (x - mean);
  report.mean_seconds_per_sample = mean;
  report.std_seconds_per_sample =
      std::sqrt(var / static_cast<double>(repetitions));
  return report;
}

}  // namespace sevmil
