#pragma once

#include "sevmil/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sevmil {

// Pairwise urgency relation between two classes of one level, read
// row-against-column: kMoreUrgent means the row class is strictly more
// urgent than the column class.
enum class Relation : std::uint8_t {
  kIncomparable = 0,
  kEquivalent = 1,
  kMoreUrgent = 2,
  kLessUrgent = 3,
};

// Resolved reading of the urgency symbols: the penalized error direction is
// under-diagnosis, i.e. predicting a class strictly less urgent than the
// truth. Every severity decision routes through this convention instead of
// comparing raw relation values.
enum class PriorityConvention { kUnderDiagnosisPenalized };

class RelationMatrix {
 public:
  RelationMatrix() = default;
  explicit RelationMatrix(Index classes)
      : classes_(classes),
        cells_(static_cast<std::size_t>(classes * classes),
               Relation::kIncomparable) {
    for (Index i = 0; i < classes; ++i) set_cell(i, i, Relation::kEquivalent);
  }

  Index classes() const { return classes_; }

  Relation operator()(Index i, Index j) const {
    return cells_[static_cast<std::size_t>(i * classes_ + j)];
  }

  // Stores the relation and its mirror image (a more urgent than b implies
  // b less urgent than a).
  void set(Index i, Index j, Relation r) {
    set_cell(i, j, r);
    if (i == j) return;
    switch (r) {
      case Relation::kMoreUrgent: set_cell(j, i, Relation::kLessUrgent); break;
      case Relation::kLessUrgent: set_cell(j, i, Relation::kMoreUrgent); break;
      default: set_cell(j, i, r); break;
    }
  }

  // Writes one cell without mirroring; lets callers represent inconsistent
  // relations that validate() is expected to report.
  void set_raw(Index i, Index j, Relation r) { set_cell(i, j, r); }

 private:
  void set_cell(Index i, Index j, Relation r) {
    cells_[static_cast<std::size_t>(i * classes_ + j)] = r;
  }

  Index classes_ = 0;
  std::vector<Relation> cells_;
};

// Coarse-to-fine class structure. Level 0 is the coarsest non-root level and
// level H-1 the finest; parent_of[h][c] maps class c at level h to its class
// at level h-1 (parent_of[0] is empty).
struct Hierarchy {
  std::vector<std::vector<std::string>> class_names;
  std::vector<std::vector<Index>> parent_of;
  std::vector<RelationMatrix> priority;
  PriorityConvention convention = PriorityConvention::kUnderDiagnosisPenalized;

  Index num_levels() const { return static_cast<Index>(class_names.size()); }
  Index num_classes(Index level) const {
    return static_cast<Index>(class_names[static_cast<std::size_t>(level)].size());
  }
  Index finest_level() const { return num_levels() - 1; }

  bool more_urgent(Index level, Index a, Index b) const {
    return priority[static_cast<std::size_t>(level)](a, b) ==
           Relation::kMoreUrgent;
  }
  bool equivalent(Index level, Index a, Index b) const {
    return priority[static_cast<std::size_t>(level)](a, b) ==
           Relation::kEquivalent;
  }

  Index parent(Index level, Index cls) const {
    return parent_of[static_cast<std::size_t>(level)][static_cast<std::size_t>(cls)];
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Checks structural and priority invariants: total/surjective parent maps,
// reflexive-symmetric Equivalent, irreflexive-antisymmetric MoreUrgent,
// transitivity of both, and priority inheritance across consecutive levels.
ValidationReport validate(const Hierarchy& h);

// True iff the mistake (predicted, true_class) lies in the penalized
// direction: the true class is strictly more urgent than the prediction.
// Equivalent, incomparable and diagonal pairs are never severe.
bool is_severe(const Hierarchy& h, Index level, Index predicted,
               Index true_class);

// Collapses a distribution over level `fine_level` onto its parent level by
// summing each parent's children. Input must sum to 1 within 1e-6.
VectorX aggregate_to_parent(const Hierarchy& h, Index fine_level,
                            const VectorX& fine_probs);

// Urgency strictly increasing with class index at every level.
Hierarchy chain_hierarchy(const std::vector<std::vector<std::string>>& names,
                          const std::vector<std::vector<Index>>& parents);

// Transitive closure of the priority relation: Equivalent classes are merged
// into groups and MoreUrgent is closed over group reachability. Conflicting
// input (cycles, ordered equivalents) is left for validate() to report.
void close_priority(Hierarchy& h);

}  // namespace sevmil
