#pragma once

#include "sevmil/hierarchy.hpp"
#include "sevmil/losses.hpp"
#include "sevmil/rng.hpp"
#include "sevmil/types.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace sevmil::testing {

inline std::vector<std::string> class_names(Index count,
                                            const std::string& prefix) {
  std::vector<std::string> names;
  for (Index i = 0; i < count; ++i)
    names.push_back(prefix + std::to_string(i));
  return names;
}

// Chain with one level: classes 0..c-1, urgency ascending with the index.
inline Hierarchy single_level_chain(Index classes) {
  return chain_hierarchy({class_names(classes, "c")}, {});
}

// Two-level chain: `coarse` classes over `fine` classes with contiguous
// parent blocks (fine class f belongs to coarse f * coarse / fine).
inline Hierarchy two_level_chain(Index coarse, Index fine) {
  std::vector<Index> parents;
  for (Index f = 0; f < fine; ++f) parents.push_back(f * coarse / fine);
  return chain_hierarchy({class_names(coarse, "g"), class_names(fine, "c")},
                         {parents});
}

// Random chain hierarchy with `levels` levels and random class counts,
// contiguous parents, for gradient sweeps.
inline Hierarchy random_chain(Rng& rng, Index levels, Index min_classes,
                              Index max_classes) {
  std::vector<std::vector<std::string>> names;
  std::vector<Index> sizes;
  Index previous = 0;
  for (Index lvl = 0; lvl < levels; ++lvl) {
    Index count = rng.next_int(static_cast<int>(min_classes),
                               static_cast<int>(max_classes));
    if (lvl > 0 && count < previous) count = previous;  // no level shrinks
    sizes.push_back(count);
    names.push_back(class_names(count, "l" + std::to_string(lvl) + "_"));
    previous = count;
  }
  std::vector<std::vector<Index>> parents;
  for (Index lvl = 1; lvl < levels; ++lvl) {
    const Index coarse = sizes[static_cast<std::size_t>(lvl - 1)];
    const Index fine = sizes[static_cast<std::size_t>(lvl)];
    std::vector<Index> map;
    for (Index f = 0; f < fine; ++f) map.push_back(f * coarse / fine);
    parents.push_back(std::move(map));
  }
  return chain_hierarchy(names, parents);
}

inline VectorX random_logits(Rng& rng, Index classes, double scale = 3.0) {
  VectorX z(classes);
  for (Index i = 0; i < classes; ++i) z[i] = rng.next_uniform(-scale, scale);
  return z;
}

// Central finite differences against the analytic gradient; `tol` is read
// relative to max(1, |analytic|, |numeric|).
inline void expect_gradient_matches(
    const std::function<LossValueAndGrad(const std::vector<VectorX>&)>& loss,
    const std::vector<VectorX>& logits, double step = 1e-4,
    double tol = 1e-4) {
  const LossValueAndGrad base = loss(logits);
  ASSERT_EQ(base.grad_logits.size(), logits.size());
  for (std::size_t h = 0; h < logits.size(); ++h) {
    ASSERT_EQ(base.grad_logits[h].size(), logits[h].size());
    for (Index k = 0; k < logits[h].size(); ++k) {
      std::vector<VectorX> plus = logits;
      std::vector<VectorX> minus = logits;
      plus[h][k] += step;
      minus[h][k] -= step;
      const double numeric =
          (loss(plus).value - loss(minus).value) / (2.0 * step);
      const double analytic = base.grad_logits[h][k];
      const double bound =
          tol * std::max({1.0, std::abs(analytic), std::abs(numeric)});
      EXPECT_NEAR(analytic, numeric, bound)
          << "level " << h << " component " << k;
    }
  }
}

// Exact rational arithmetic for the metric brute-force oracle.
struct Rational {
  long long num = 0;
  long long den = 1;

  static long long gcd(long long a, long long b) {
    while (b != 0) {
      const long long t = a % b;
      a = b;
      b = t;
    }
    return a < 0 ? -a : a;
  }

  void reduce() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = gcd(num == 0 ? 1 : num, den);
    num /= g;
    den /= g;
  }

  Rational operator+(const Rational& other) const {
    Rational r{num * other.den + other.num * den, den * other.den};
    r.reduce();
    return r;
  }

  Rational operator*(const Rational& other) const {
    Rational r{num * other.num, den * other.den};
    r.reduce();
    return r;
  }

  double value() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

}  // namespace sevmil::testing
