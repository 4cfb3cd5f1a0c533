#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "autodenoise/dataio.hpp"
#include "autodenoise/recmodel.hpp"
#include "autodenoise/rng.hpp"

namespace autodenoise {

struct KMetrics {
  int k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ndcg = 0.0;
};

struct MetricsReport {
  std::vector<KMetrics> at_k;
  double auc = 0.0;  // validation AUC of the evaluated parameters
  std::size_t targets = 0;  // evaluated test interactions
  std::size_t skipped = 0;  // targets with an empty candidate set
};

namespace detail {

// 1-based rank of `target` among the user's candidates (all items minus the
// user's train items), descending score with ties broken by ascending index.
inline int rank_of_target(const std::vector<double>& scores,
                          const std::vector<int>& train_items, int target) {
  const double st = scores[target];
  int rank = 1;
  for (int v = 0; v < static_cast<int>(scores.size()); ++v) {
    if (v == target || std::binary_search(train_items.begin(), train_items.end(), v))
      continue;
    if (scores[v] > st || (scores[v] == st && v < target)) ++rank;
  }
  return rank;
}

}  // namespace detail

// Single-target evaluation: each test interaction is ranked against every
// item the user has not trained on. With one relevant item per target,
// recall@K = K * precision@K and NDCG reduces to 1/log2(rank+1) on hits.
inline MetricsReport rank_metrics(const MFParams& p,
                                  const std::vector<Interaction>& test,
                                  const std::vector<std::vector<int>>& train_items,
                                  const std::vector<int>& ks) {
  if (test.empty()) throw std::invalid_argument("rank_metrics: empty test set");
  MetricsReport report;
  report.at_k.reserve(ks.size());
  for (int k : ks) report.at_k.push_back({k, 0, 0, 0, 0});

  std::vector<double> hits(ks.size(), 0.0), ndcg_sum(ks.size(), 0.0);
  std::vector<double> scores(p.n);
  int cached_user = -1;
  for (const auto& t : test) {
    const auto& exclude = train_items[t.user];
    if (static_cast<int>(exclude.size()) >= p.n) {
      ++report.skipped;
      continue;
    }
    if (t.user != cached_user) {
      for (int v = 0; v < p.n; ++v) scores[v] = score(p, t.user, v);
      cached_user = t.user;
    }
    const int rank = detail::rank_of_target(scores, exclude, t.item);
    ++report.targets;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (rank <= ks[i]) {
        hits[i] += 1.0;
        ndcg_sum[i] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      }
    }
  }

  const auto t_count = static_cast<double>(report.targets);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    auto& m = report.at_k[i];
    if (report.targets == 0) continue;
    m.precision = hits[i] / (t_count * m.k);
    m.recall = hits[i] / t_count;
    m.ndcg = ndcg_sum[i] / t_count;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  }
  return report;
}

// Sampled AUC on the validation positives: for each positive, n_neg_eval
// items the user never trained on (and distinct from the target) are drawn
// from a stream keyed only by (seed, target index), so every epoch of a run
// scores the same pairs. Ties count 1/2.
inline double auc_reward(const MFParams& p,
                         const std::vector<Interaction>& validation,
                         const std::vector<std::vector<int>>& train_items,
                         int n_neg_eval, std::uint64_t seed) {
  if (validation.empty()) throw std::invalid_argument("auc_reward: empty validation set");
  if (n_neg_eval < 1) throw std::invalid_argument("auc_reward: n_neg_eval must be >= 1");

  double concordant = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const auto& t = validation[i];
    const auto& owned = train_items[t.user];
    // candidates must exist outside the train items and the target itself
    const int free_items = p.n - static_cast<int>(owned.size()) -
                           (std::binary_search(owned.begin(), owned.end(), t.item) ? 0 : 1);
    if (free_items < 1) continue;
    const double s_pos = score(p, t.user, t.item);
    Rng rng(derive_seed(seed, stream::kEvalNegative, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < n_neg_eval; ++j) {
      int v;
      do {
        v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(p.n)));
      } while (v == t.item || std::binary_search(owned.begin(), owned.end(), v));
      const double s_neg = score(p, t.user, v);
      if (s_pos > s_neg)
        concordant += 1.0;
      else if (s_pos == s_neg)
        concordant += 0.5;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.5 : concordant / static_cast<double>(pairs);
}

// Exact AUC over every (positive, non-interacted item) pair; the reference
// the sampled reward converges to.
inline double auc_exhaustive(const MFParams& p,
                             const std::vector<Interaction>& validation,
                             const std::vector<std::vector<int>>& train_items) {
  if (validation.empty()) throw std::invalid_argument("auc_exhaustive: empty validation set");
  double concordant = 0.0;
  std::int64_t pairs = 0;
  for (const auto& t : validation) {
    const auto& owned = train_items[t.user];
    const double s_pos = score(p, t.user, t.item);
    for (int v = 0; v < p.n; ++v) {
      if (v == t.item || std::binary_search(owned.begin(), owned.end(), v)) continue;
      const double s_neg = score(p, t.user, v);
      if (s_pos > s_neg)
        concordant += 1.0;
      else if (s_pos == s_neg)
        concordant += 0.5;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.5 : concordant / static_cast<double>(pairs);
}

}  // namespace autodenoise
