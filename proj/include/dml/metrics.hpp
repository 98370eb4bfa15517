#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dml {

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Sort-based, O(n log n). Throws MetricError unless both
/// classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

/// Mean squared difference. Throws MetricError on empty or mismatched input.
double mse(std::span<const double> preds, std::span<const double> targets);

struct ConsistencyResult {
  double ratio = 0.0;
  std::size_t eligible_pairs = 0;  // pairs with differing ratings
  std::size_t evaluated_pairs = 0;
  std::size_t consistent_pairs = 0;
  /// Pairs where both tasks order the pair opposite to the ratings.
  std::size_t reversed_pairs = 0;
  bool sampled = false;
};

inline constexpr std::size_t kDefaultMaxPairs = 1'000'000;

/// Fraction of pairs with differing ratings for which both prediction lists
/// order the pair the same way as the ratings. A prediction tie is
/// inconsistent. Beyond max_pairs eligible pairs, max_pairs of them are
/// sampled uniformly without replacement using seed.
ConsistencyResult consistency(std::span<const int> ratings, std::span<const double> pred1,
                              std::span<const double> pred2, std::size_t max_pairs = kDefaultMaxPairs,
                              std::uint64_t seed = 0);

double consistency_ratio(std::span<const int> ratings, std::span<const double> pred1,
                         std::span<const double> pred2, std::size_t max_pairs = kDefaultMaxPairs,
                         std::uint64_t seed = 0);

enum class Direction { greater, less };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 0.5;
};

/// Welch's unequal-variance one-tailed t-test. Direction::greater tests
/// mean(treat) > mean(base); Direction::less tests mean(treat) < mean(base).
/// Needs at least two runs per side.
TTestResult welch_t_test(std::span<const double> base, std::span<const double> treat,
                         Direction direction);

double one_tailed_t_test(std::span<const double> base, std::span<const double> treat,
                         Direction direction);

double mean(std::span<const double> xs);
/// Sample standard deviation (n − 1); zero for fewer than two values.
double stddev(std::span<const double> xs);

}  // namespace dml
