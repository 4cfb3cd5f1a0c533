// Test-only oracles and fixtures. Everything here recomputes results through
// independent code paths (naive loops, full sorts, closed forms) so the
// library implementations are checked against something they do not share.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "autodenoise/controller.hpp"
#include "autodenoise/dataio.hpp"
#include "autodenoise/recmodel.hpp"
#include "autodenoise/rng.hpp"

namespace support {

using namespace autodenoise;

// ---------------------------------------------------------------------------
// Finite differences

inline std::vector<double*> mf_param_view(MFParams& p) {
  std::vector<double*> view;
  view.reserve(p.user_emb.size() + p.item_emb.size());
  for (auto& x : p.user_emb) view.push_back(&x);
  for (auto& x : p.item_emb) view.push_back(&x);
  return view;
}

inline std::vector<double*> controller_param_view(ControllerParams& p) {
  std::vector<double*> view;
  for_each_tensor(p, [&](Param& t) {
    for (auto& x : t.value) view.push_back(&x);
  });
  return view;
}

template <class F>
std::vector<double> fd_gradient(const std::vector<double*>& view, F&& f,
                                double h = 1e-5) {
  std::vector<double> g(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    const double orig = *view[i];
    *view[i] = orig + h;
    const double fp = f();
    *view[i] = orig - h;
    const double fm = f();
    *view[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// flattened analytic gradients, in the same order as the views above
inline std::vector<double> flatten_mf_grad(const MFParams& p, const SparseGrad& g) {
  std::vector<double> out(p.user_emb.size() + p.item_emb.size(), 0.0);
  for (const auto& [u, row] : g.user_rows)
    for (int k = 0; k < p.d; ++k) out[static_cast<std::size_t>(u) * p.d + k] = row[k];
  const std::size_t offset = p.user_emb.size();
  for (const auto& [v, row] : g.item_rows)
    for (int k = 0; k < p.d; ++k)
      out[offset + static_cast<std::size_t>(v) * p.d + k] = row[k];
  return out;
}

inline std::vector<double> flatten_controller_grad(const ControllerGrad& g) {
  std::vector<double> out;
  for (const auto* xs : {&g.w1, &g.b1, &g.w2, &g.b2, &g.w_hard, &g.w_mu, &g.b_mu,
                         &g.w_var, &g.b_var})
    out.insert(out.end(), xs->begin(), xs->end());
  return out;
}

// max relative error with an absolute floor for near-zero coordinates
inline double max_rel_error(const std::vector<double>& a,
                            const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(a[i]), std::abs(b[i]));
    if (denom < 1e-7) {
      if (std::abs(a[i] - b[i]) > 1e-9) worst = std::max(worst, 1.0);
      continue;
    }
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Reference implementations

// independent Adam, dense over one parameter vector
struct ReferenceAdam {
  std::vector<double> m, v;
  std::int64_t t = 0;
  void step(std::vector<double>& theta, const std::vector<double>& g, double lr,
            double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / (1.0 - std::pow(beta1, static_cast<double>(t)));
      const double vhat = v[i] / (1.0 - std::pow(beta2, static_cast<double>(t)));
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

inline double naive_dot(const MFParams& p, int u, int v) {
  double s = 0.0;
  for (int k = 0; k < p.d; ++k)
    s += p.user_emb[static_cast<std::size_t>(u) * p.d + k] *
         p.item_emb[static_cast<std::size_t>(v) * p.d + k];
  return s;
}

// softmax loss recomputed in extended precision, direct formula
inline double long_double_softmax_loss(const MFParams& p, int u, int v_pos,
                                       const std::vector<int>& negs) {
  std::vector<long double> scores;
  scores.push_back(static_cast<long double>(naive_dot(p, u, v_pos)));
  for (int v : negs) scores.push_back(static_cast<long double>(naive_dot(p, u, v)));
  const long double mx = *std::max_element(scores.begin(), scores.end());
  long double denom = 0.0;
  for (long double s : scores) denom += expl(s - mx);
  return static_cast<double>(-(scores[0] - mx - logl(denom)));
}

// full stable sort, same tie order as the contract (score desc, index asc)
inline std::vector<int> brute_topk(const MFParams& p, int u, int k,
                                   const std::vector<int>& exclude) {
  std::vector<std::pair<double, int>> all;
  for (int v = 0; v < p.n; ++v) {
    if (std::find(exclude.begin(), exclude.end(), v) != exclude.end()) continue;
    all.emplace_back(naive_dot(p, u, v), v);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i)
    out.push_back(all[i].second);
  return out;
}

struct BruteMetrics {
  double precision = 0, recall = 0, f1 = 0, ndcg = 0;
};

// per-target full-sort ranking, accumulated in the same target order
inline BruteMetrics brute_rank_metrics(const MFParams& p,
                                       const std::vector<Interaction>& test,
                                       const std::vector<std::vector<int>>& train_items,
                                       int k) {
  double hits = 0.0, ndcg = 0.0;
  std::size_t targets = 0;
  for (const auto& t : test) {
    std::vector<std::pair<double, int>> cand;
    for (int v = 0; v < p.n; ++v) {
      if (std::binary_search(train_items[t.user].begin(),
                             train_items[t.user].end(), v))
        continue;
      cand.emplace_back(naive_dot(p, t.user, v), v);
    }
    if (cand.empty()) continue;
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    ++targets;
    for (std::size_t r = 0; r < cand.size(); ++r) {
      if (cand[r].second == t.item) {
        const int rank = static_cast<int>(r) + 1;
        if (rank <= k) {
          hits += 1.0;
          ndcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        }
        break;
      }
    }
  }
  BruteMetrics out;
  if (targets == 0) return out;
  const auto tc = static_cast<double>(targets);
  out.precision = hits / (tc * k);
  out.recall = hits / tc;
  out.ndcg = ndcg / tc;
  out.f1 = (out.precision + out.recall) > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// all (positive, non-interacted) pairs, naive loops
inline double brute_auc_exhaustive(const MFParams& p,
                                   const std::vector<Interaction>& val,
                                   const std::vector<std::vector<int>>& train_items) {
  double conc = 0.0;
  std::int64_t pairs = 0;
  for (const auto& t : val) {
    const double sp = naive_dot(p, t.user, t.item);
    for (int v = 0; v < p.n; ++v) {
      if (v == t.item) continue;
      if (std::binary_search(train_items[t.user].begin(),
                             train_items[t.user].end(), v))
        continue;
      const double sn = naive_dot(p, t.user, v);
      conc += sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.5 : conc / static_cast<double>(pairs);
}

// closed-form exponential moving average of a reward sequence from b0
inline double closed_form_ema(double b0, const std::vector<double>& rewards,
                              double gamma) {
  const auto n = static_cast<double>(rewards.size());
  double value = b0 * std::pow(gamma, n);
  for (std::size_t i = 0; i < rewards.size(); ++i)
    value += (1.0 - gamma) * rewards[i] *
             std::pow(gamma, n - 1.0 - static_cast<double>(i));
  return value;
}

// ---------------------------------------------------------------------------
// Fixtures

// Clustered preference data: user u likes items of cluster u % clusters, so a
// small MF can learn the structure and injected uniform false positives fight
// it. Ratings are all 5, timestamps increase per user, so build_split yields
// clean validation/test sets.
struct SyntheticSpec {
  int users = 60;
  int items = 50;
  int clusters = 5;
  int likes_per_user = 12;
  double fp_rate = 0.0;
  std::uint64_t seed = 7;
};

inline SplitDataset make_synthetic_split(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0xF1A7ULL));
  std::vector<RatingRecord> records;
  for (int u = 0; u < spec.users; ++u) {
    std::vector<int> pool;
    for (int v = 0; v < spec.items; ++v)
      if (v % spec.clusters == u % spec.clusters) pool.push_back(v);
    rng.shuffle(pool);
    const int likes = std::min<int>(spec.likes_per_user, static_cast<int>(pool.size()));
    for (int k = 0; k < likes; ++k) {
      RatingRecord r;
      r.user_raw = "u" + std::to_string(u);
      r.item_raw = "i" + std::to_string(pool[k]);
      r.rating = 5.0;
      r.timestamp = k;
      records.push_back(std::move(r));
    }
  }
  SplitDataset split = build_split(records);
  if (spec.fp_rate > 0.0) {
    NoiseInjection noisy = inject_synthetic_noise(split.train, split.m, split.n,
                                                  spec.fp_rate, spec.seed);
    split.train = std::move(noisy.train);
    split.train_items.assign(split.m, {});
    for (const auto& x : split.train) split.train_items[x.user].push_back(x.item);
    for (auto& items : split.train_items) {
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
    }
  }
  return split;
}

}  // namespace support
