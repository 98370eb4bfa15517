#include "dml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

#include <boost/math/distributions/students_t.hpp>

#include "dml/error.hpp"
#include "dml/random.hpp"

namespace dml {

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t positives = 0, negatives = 0;
  for (double l : labels) {
    if (l != 0.0 && l != 1.0) throw MetricError("auc: labels must be 0 or 1");
    (l == 1.0 ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) throw MetricError("auc: undefined without both classes");

  // Twice the Mann-Whitney count, kept integral so the result is exact.
  std::uint64_t doubled = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1.0 ? pos : neg) += 1;
      ++j;
    }
    doubled += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double mse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) throw MetricError("mse: length mismatch");
  if (preds.empty()) throw MetricError("mse: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(preds.size());
}

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

struct PairTally {
  std::size_t evaluated = 0;
  std::size_t consistent = 0;
  std::size_t reversed = 0;

  void add(int rating_sign, double d1, double d2) {
    ++evaluated;
    const int s1 = sign(d1);
    const int s2 = sign(d2);
    if (s1 == rating_sign && s2 == rating_sign) ++consistent;
    if (s1 == -rating_sign && s2 == -rating_sign) ++reversed;
  }
};

}  // namespace

ConsistencyResult consistency(std::span<const int> ratings, std::span<const double> pred1,
                              std::span<const double> pred2, std::size_t max_pairs,
                              std::uint64_t seed) {
  const std::size_t n = ratings.size();
  if (pred1.size() != n || pred2.size() != n) throw MetricError("consistency: length mismatch");
  if (n < 2) throw MetricError("consistency: need at least two examples");
  if (max_pairs == 0) throw MetricError("consistency: max_pairs must be positive");

  std::map<int, std::size_t> per_rating;
  for (int r : ratings) ++per_rating[r];
  std::size_t eligible = n * (n - 1) / 2;
  for (const auto& [r, c] : per_rating) eligible -= c * (c - 1) / 2;
  if (eligible == 0) throw MetricError("consistency: no pair with differing ratings");

  ConsistencyResult result;
  result.eligible_pairs = eligible;
  PairTally tally;
  auto visit = [&](std::size_t i, std::size_t j) {
    tally.add(sign(static_cast<double>(ratings[i] - ratings[j])), pred1[i] - pred1[j], pred2[i] - pred2[j]);
  };

  if (eligible <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (ratings[i] != ratings[j]) visit(i, j);
      }
    }
  } else {
    result.sampled = true;
    Rng rng(derive_seed(seed, "consistency"));
    if (eligible <= 4 * max_pairs) {
      // Dense regime: enumerate, then take a uniform prefix of a partial shuffle.
      std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
      pairs.reserve(eligible);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (ratings[i] != ratings[j]) pairs.emplace_back(i, j);
        }
      }
      for (std::size_t s = 0; s < max_pairs; ++s) {
        std::swap(pairs[s], pairs[s + rng.below(pairs.size() - s)]);
        visit(pairs[s].first, pairs[s].second);
      }
    } else {
      // Sparse regime: rejection-sample unordered pairs, deduplicated.
      std::unordered_set<std::uint64_t> seen;
      seen.reserve(max_pairs * 2);
      while (tally.evaluated < max_pairs) {
        std::size_t i = rng.below(n);
        std::size_t j = rng.below(n);
        if (i == j || ratings[i] == ratings[j]) continue;
        if (i > j) std::swap(i, j);
        if (!seen.insert(static_cast<std::uint64_t>(i) * n + j).second) continue;
        visit(i, j);
      }
    }
  }
  result.evaluated_pairs = tally.evaluated;
  result.consistent_pairs = tally.consistent;
  result.reversed_pairs = tally.reversed;
  result.ratio = static_cast<double>(tally.consistent) / static_cast<double>(tally.evaluated);
  return result;
}

double consistency_ratio(std::span<const int> ratings, std::span<const double> pred1,
                         std::span<const double> pred2, std::size_t max_pairs, std::uint64_t seed) {
  return consistency(ratings, pred1, pred2, max_pairs, seed).ratio;
}

std::string_view to_string(Direction d) { return d == Direction::greater ? "greater" : "less"; }

Direction parse_direction(std::string_view name) {
  if (name == "greater") return Direction::greater;
  if (name == "less" || name == "smaller") return Direction::less;
  throw MetricError("unknown direction '" + std::string(name) + "'");
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

TTestResult welch_t_test(std::span<const double> base, std::span<const double> treat,
                         Direction direction) {
  if (base.size() < 2 || treat.size() < 2) throw MetricError("t-test: need at least two runs per side");
  const double nb = static_cast<double>(base.size());
  const double nt = static_cast<double>(treat.size());
  const double vb = std::pow(stddev(base), 2) / nb;
  const double vt = std::pow(stddev(treat), 2) / nt;
  const double diff = mean(treat) - mean(base);
  const double signed_diff = direction == Direction::greater ? diff : -diff;

  TTestResult r;
  const double se2 = vb + vt;
  if (se2 == 0.0) {
    r.df = nb + nt - 2.0;
    if (signed_diff == 0.0) {
      r.t = 0.0;
      r.p = 0.5;
    } else {
      r.t = signed_diff > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p = signed_diff > 0 ? 0.0 : 1.0;
    }
    return r;
  }
  r.t = signed_diff / std::sqrt(se2);
  r.df = se2 * se2 / (vb * vb / (nb - 1.0) + vt * vt / (nt - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

double one_tailed_t_test(std::span<const double> base, std::span<const double> treat,
                         Direction direction) {
  return welch_t_test(base, treat, direction).p;
}

}  // namespace dml
