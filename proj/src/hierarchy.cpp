#include "sevmil/hierarchy.hpp"

#include "sevmil/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sevmil {
namespace {

void check_level(const Hierarchy& h, Index level) {
  require(level >= 0 && level < h.num_levels(), ErrorCode::kPrecondition,
          "level index out of range");
}

void check_class(const Hierarchy& h, Index level, Index cls) {
  require(cls >= 0 && cls < h.num_classes(level), ErrorCode::kPrecondition,
          "class index out of range");
}

}  // namespace

ValidationReport validate(const Hierarchy& h) {
  ValidationReport report;
  auto flag = [&report](const std::string& v) { report.violations.push_back(v); };

  const Index levels = h.num_levels();
  if (levels == 0) {
    flag("hierarchy has no levels");
    return report;
  }
  if (h.parent_of.size() != static_cast<std::size_t>(levels) ||
      h.priority.size() != static_cast<std::size_t>(levels)) {
    flag("level count mismatch between class_names, parent_of and priority");
    return report;
  }

  for (Index lvl = 0; lvl < levels; ++lvl) {
    const Index classes = h.num_classes(lvl);
    std::ostringstream at;
    at << " at level " << lvl;
    if (classes == 0) flag("empty level" + at.str());

    // parent map: total and surjective for every non-coarsest level
    if (lvl >= 1) {
      const auto& parents = h.parent_of[static_cast<std::size_t>(lvl)];
      const Index coarse = h.num_classes(lvl - 1);
      if (parents.size() != static_cast<std::size_t>(classes)) {
        flag("non-total parent_map" + at.str());
      } else {
        std::vector<bool> covered(static_cast<std::size_t>(coarse), false);
        bool in_range = true;
        for (Index c = 0; c < classes; ++c) {
          const Index p = parents[static_cast<std::size_t>(c)];
          if (p < 0 || p >= coarse) {
            in_range = false;
          } else {
            covered[static_cast<std::size_t>(p)] = true;
          }
        }
        if (!in_range) flag("non-total parent_map" + at.str());
        if (in_range &&
            !std::all_of(covered.begin(), covered.end(), [](bool b) { return b; })) {
          flag("parent_map not surjective" + at.str());
        }
      }
    }

    const auto& rel = h.priority[static_cast<std::size_t>(lvl)];
    if (rel.classes() != classes) {
      flag("priority matrix size mismatch" + at.str());
      continue;
    }
    for (Index i = 0; i < classes; ++i) {
      if (rel(i, i) != Relation::kEquivalent)
        flag("priority not reflexive (Equivalent) on the diagonal" + at.str());
    }
    for (Index i = 0; i < classes; ++i) {
      for (Index j = 0; j < classes; ++j) {
        if (rel(i, j) == Relation::kEquivalent && rel(j, i) != Relation::kEquivalent)
          flag("Equivalent not symmetric" + at.str());
        if (rel(i, j) == Relation::kMoreUrgent && rel(j, i) == Relation::kMoreUrgent)
          flag("MoreUrgent not antisymmetric" + at.str());
      }
    }
    for (Index i = 0; i < classes; ++i) {
      for (Index j = 0; j < classes; ++j) {
        for (Index k = 0; k < classes; ++k) {
          if (rel(i, j) == Relation::kMoreUrgent &&
              rel(j, k) == Relation::kMoreUrgent &&
              rel(i, k) != Relation::kMoreUrgent)
            flag("MoreUrgent not transitive" + at.str());
          if (rel(i, j) == Relation::kEquivalent &&
              rel(j, k) == Relation::kEquivalent &&
              rel(i, k) != Relation::kEquivalent)
            flag("Equivalent not transitive" + at.str());
        }
      }
    }
  }

  // priority inheritance between consecutive levels
  for (Index lvl = 1; lvl < levels; ++lvl) {
    const auto& parents = h.parent_of[static_cast<std::size_t>(lvl)];
    if (parents.size() != static_cast<std::size_t>(h.num_classes(lvl))) continue;
    const Index classes = h.num_classes(lvl);
    for (Index x = 0; x < classes; ++x) {
      for (Index y = 0; y < classes; ++y) {
        const Index px = parents[static_cast<std::size_t>(x)];
        const Index py = parents[static_cast<std::size_t>(y)];
        if (px < 0 || py < 0 || px >= h.num_classes(lvl - 1) ||
            py >= h.num_classes(lvl - 1))
          continue;
        if (h.more_urgent(lvl - 1, px, py) && !h.more_urgent(lvl, x, y)) {
          std::ostringstream msg;
          msg << "priority inheritance violated: level " << lvl << " classes ("
              << x << "," << y << ") do not inherit parent order (" << px
              << " more urgent than " << py << ")";
          flag(msg.str());
        }
      }
    }
  }
  return report;
}

bool is_severe(const Hierarchy& h, Index level, Index predicted,
               Index true_class) {
  check_level(h, level);
  check_class(h, level, predicted);
  check_class(h, level, true_class);
  return h.more_urgent(level, true_class, predicted);
}

VectorX aggregate_to_parent(const Hierarchy& h, Index fine_level,
                            const VectorX& fine_probs) {
  check_level(h, fine_level);
  require(fine_level >= 1, ErrorCode::kPrecondition,
          "aggregate_to_parent needs a level with a parent level");
  require(fine_probs.size() == h.num_classes(fine_level),
          ErrorCode::kPrecondition, "probability vector size mismatch");
  require(std::abs(fine_probs.sum() - 1.0) <= 1e-6, ErrorCode::kPrecondition,
          "probability vector not normalized");

  VectorX coarse = VectorX::Zero(h.num_classes(fine_level - 1));
  for (Index c = 0; c < fine_probs.size(); ++c)
    coarse[h.parent(fine_level, c)] += fine_probs[c];
  return coarse;
}

Hierarchy chain_hierarchy(const std::vector<std::vector<std::string>>& names,
                          const std::vector<std::vector<Index>>& parents) {
  Hierarchy h;
  h.class_names = names;
  h.parent_of.resize(names.size());
  for (std::size_t lvl = 1; lvl < names.size(); ++lvl)
    h.parent_of[lvl] = parents.at(lvl - 1);
  for (const auto& level : names) {
    RelationMatrix rel(static_cast<Index>(level.size()));
    for (Index i = 0; i < rel.classes(); ++i)
      for (Index j = 0; j < i; ++j) rel.set(i, j, Relation::kMoreUrgent);
    h.priority.push_back(std::move(rel));
  }
  return h;
}

void close_priority(Hierarchy& h) {
  for (auto& rel : h.priority) {
    const Index n = rel.classes();
    // Equivalence groups via union-find.
    std::vector<Index> root(static_cast<std::size_t>(n));
    std::iota(root.begin(), root.end(), Index{0});
    auto find = [&root](Index a) {
      while (root[static_cast<std::size_t>(a)] != a)
        a = root[static_cast<std::size_t>(a)] =
            root[static_cast<std::size_t>(root[static_cast<std::size_t>(a)])];
      return a;
    };
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (rel(i, j) == Relation::kEquivalent)
          root[static_cast<std::size_t>(find(i))] = find(j);

    // Group-level reachability of MoreUrgent (Floyd-Warshall).
    std::vector<std::vector<bool>> above(
        static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (rel(i, j) == Relation::kMoreUrgent)
          above[static_cast<std::size_t>(find(i))][static_cast<std::size_t>(find(j))] =
              true;
    for (Index k = 0; k < n; ++k)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (above[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] &&
              above[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])
            above[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;

    const RelationMatrix original = rel;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const Index gi = find(i);
        const Index gj = find(j);
        const bool up =
            above[static_cast<std::size_t>(gi)][static_cast<std::size_t>(gj)];
        const bool down =
            above[static_cast<std::size_t>(gj)][static_cast<std::size_t>(gi)];
        if (gi == gj) {
          // Equivalence group; a MoreUrgent edge inside it is contradictory
          // input, kept verbatim so validate() reports it.
          rel.set_raw(i, j,
                      original(i, j) == Relation::kMoreUrgent
                          ? Relation::kMoreUrgent
                          : Relation::kEquivalent);
        } else if (up && down) {
          // Priority cycle across groups: keep both directions so
          // validate() reports the antisymmetry violation.
          rel.set_raw(i, j, Relation::kMoreUrgent);
        } else if (up) {
          rel.set_raw(i, j, Relation::kMoreUrgent);
        } else if (down) {
          rel.set_raw(i, j, Relation::kLessUrgent);
        } else {
          rel.set_raw(i, j, Relation::kIncomparable);
        }
      }
    }
  }
}

}  // namespace sevmil
