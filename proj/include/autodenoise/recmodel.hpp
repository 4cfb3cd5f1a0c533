#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "autodenoise/rng.hpp"

namespace autodenoise {

// Matrix-factorization recommender. Scores are plain dot products of user and
// item embeddings; training minimizes a per-sample-weighted sampled-softmax
// loss with L2 on the touched rows, via sparse Adam updates.
struct MFParams {
  int m = 0;  // users
  int n = 0;  // items
  int d = 0;  // embedding dimension
  std::vector<double> user_emb;  // m x d, row-major
  std::vector<double> item_emb;  // n x d
  // Adam moments mirror the embedding tables
  std::vector<double> adam_m_user, adam_v_user;
  std::vector<double> adam_m_item, adam_v_item;
  std::int64_t adam_step = 0;
  double lambda1 = 1e-5;

  const double* user_row(int u) const { return user_emb.data() + static_cast<std::size_t>(u) * d; }
  double* user_row(int u) { return user_emb.data() + static_cast<std::size_t>(u) * d; }
  const double* item_row(int v) const { return item_emb.data() + static_cast<std::size_t>(v) * d; }
  double* item_row(int v) { return item_emb.data() + static_cast<std::size_t>(v) * d; }
};

inline MFParams init_params(int m, int n, int d, std::uint64_t seed,
                            double init_scale) {
  if (m < 1 || n < 1 || d < 1)
    throw std::invalid_argument("init_params: m, n, d must be >= 1");
  MFParams p;
  p.m = m;
  p.n = n;
  p.d = d;
  p.user_emb.resize(static_cast<std::size_t>(m) * d);
  p.item_emb.resize(static_cast<std::size_t>(n) * d);
  Rng rng(seed);
  for (auto& x : p.user_emb) x = rng.next_normal() * init_scale;
  for (auto& x : p.item_emb) x = rng.next_normal() * init_scale;
  p.adam_m_user.assign(p.user_emb.size(), 0.0);
  p.adam_v_user.assign(p.user_emb.size(), 0.0);
  p.adam_m_item.assign(p.item_emb.size(), 0.0);
  p.adam_v_item.assign(p.item_emb.size(), 0.0);
  return p;
}

inline double score(const MFParams& p, int u, int v) {
  if (u < 0 || u >= p.m || v < 0 || v >= p.n)
    throw std::out_of_range("score: index out of range");
  const double* eu = p.user_row(u);
  const double* ev = p.item_row(v);
  double s = 0.0;
  for (int k = 0; k < p.d; ++k) s += eu[k] * ev[k];
  return s;
}

// Per-sample loss over the candidate set {positive} + negatives:
//   l = -log( exp(s_pos) / sum_j exp(s_j) )
// computed with max subtraction. probs caches the softmax over candidates
// (positive first) for the backward pass.
struct LossCache {
  double loss = 0.0;
  std::vector<double> probs;
};

inline LossCache softmax_loss(const MFParams& p, int u, int v_pos,
                              const std::vector<int>& v_negs) {
  if (v_negs.empty()) throw std::invalid_argument("softmax_loss: need >= 1 negative");
  for (int v : v_negs)
    if (v == v_pos)
      throw std::invalid_argument("softmax_loss: positive among negatives");

  LossCache cache;
  const std::size_t c = v_negs.size() + 1;
  std::vector<double> scores(c);
  scores[0] = score(p, u, v_pos);
  for (std::size_t j = 0; j < v_negs.size(); ++j)
    scores[j + 1] = score(p, u, v_negs[j]);

  const double mx = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s - mx);
  cache.probs.resize(c);
  for (std::size_t j = 0; j < c; ++j)
    cache.probs[j] = std::exp(scores[j] - mx) / denom;
  cache.loss = -(scores[0] - mx - std::log(denom));
  return cache;
}

struct BatchSample {
  int user = 0;
  int pos = 0;
  std::vector<int> negs;
};

// Sparse gradient keyed by row index; ordered maps keep the update and
// accumulation order deterministic.
struct SparseGrad {
  std::map<int, std::vector<double>> user_rows;
  std::map<int, std::vector<double>> item_rows;
};

struct BatchLossResult {
  double value = 0.0;
  SparseGrad grad;
  std::vector<double> sample_losses;  // unweighted per-sample losses
};

// L' = (1/B) sum_i w_i * l_i + lambda1 * ||touched rows||^2, with each
// distinct touched row penalized once. Weights are constants here: no
// gradient flows through them. Backprop through the sampled softmax:
//   dl/ds_j = p_j - [j == pos],  ds_j/de_u = e_vj,  ds_j/de_vj = e_u.
inline BatchLossResult weighted_batch_loss(const MFParams& p,
                                           const std::vector<BatchSample>& batch,
                                           const std::vector<double>& weights) {
  if (batch.size() != weights.size())
    throw std::invalid_argument("weighted_batch_loss: |weights| != |batch|");
  for (double w : weights)
    if (w < 0.0) throw std::invalid_argument("weighted_batch_loss: negative weight");

  BatchLossResult out;
  const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  const int d = p.d;
  auto user_grad = [&](int u) -> std::vector<double>& {
    auto [it, inserted] = out.grad.user_rows.try_emplace(u);
    if (inserted) it->second.assign(d, 0.0);
    return it->second;
  };
  auto item_grad = [&](int v) -> std::vector<double>& {
    auto [it, inserted] = out.grad.item_rows.try_emplace(v);
    if (inserted) it->second.assign(d, 0.0);
    return it->second;
  };

  out.sample_losses.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    const LossCache cache = softmax_loss(p, s.user, s.pos, s.negs);
    out.sample_losses.push_back(cache.loss);
    out.value += inv_b * weights[i] * cache.loss;

    const double* eu = p.user_row(s.user);
    auto& gu = user_grad(s.user);
    for (std::size_t j = 0; j < cache.probs.size(); ++j) {
      const int v = j == 0 ? s.pos : s.negs[j - 1];
      const double gs =
          inv_b * weights[i] * (cache.probs[j] - (j == 0 ? 1.0 : 0.0));
      const double* ev = p.item_row(v);
      auto& gv = item_grad(v);
      for (int k = 0; k < d; ++k) {
        gu[k] += gs * ev[k];
        gv[k] += gs * eu[k];
      }
    }
  }

  // L2 on the touched rows (once per distinct row)
  if (p.lambda1 != 0.0) {
    for (auto& [u, g] : out.grad.user_rows) {
      const double* eu = p.user_row(u);
      for (int k = 0; k < d; ++k) {
        out.value += p.lambda1 * eu[k] * eu[k];
        g[k] += 2.0 * p.lambda1 * eu[k];
      }
    }
    for (auto& [v, g] : out.grad.item_rows) {
      const double* ev = p.item_row(v);
      for (int k = 0; k < d; ++k) {
        out.value += p.lambda1 * ev[k] * ev[k];
        g[k] += 2.0 * p.lambda1 * ev[k];
      }
    }
  }
  return out;
}

// Sparse Adam: moments and bias correction are applied only to the touched
// rows; the step counter is shared.
inline void adam_step(MFParams& p, const SparseGrad& grad, double lr,
                      double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
  ++p.adam_step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.adam_step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.adam_step));
  auto update_rows = [&](const std::map<int, std::vector<double>>& rows,
                         std::vector<double>& theta, std::vector<double>& mom,
                         std::vector<double>& vel, const char* kind) {
    for (const auto& [row, g] : rows) {
      const std::size_t base = static_cast<std::size_t>(row) * p.d;
      for (int k = 0; k < p.d; ++k) {
        const double gk = g[k];
        if (!std::isfinite(gk))
          throw std::runtime_error(std::string("adam_step: non-finite gradient at ") +
                                   kind + " row " + std::to_string(row));
        double& mk = mom[base + k];
        double& vk = vel[base + k];
        mk = beta1 * mk + (1.0 - beta1) * gk;
        vk = beta2 * vk + (1.0 - beta2) * gk * gk;
        theta[base + k] -= lr * (mk / bc1) / (std::sqrt(vk / bc2) + eps);
      }
    }
  };
  update_rows(grad.user_rows, p.user_emb, p.adam_m_user, p.adam_v_user, "user");
  update_rows(grad.item_rows, p.item_emb, p.adam_m_item, p.adam_v_item, "item");
}

// Top-K items for user u excluding `exclude` (sorted ascending), descending
// score with ties broken by ascending item index.
inline std::vector<int> recommend_topk(const MFParams& p, int u, int k,
                                       const std::vector<int>& exclude) {
  if (u < 0 || u >= p.m) throw std::out_of_range("recommend_topk: bad user");
  const int candidates = p.n - static_cast<int>(exclude.size());
  if (k < 0 || k > candidates)
    throw std::invalid_argument("recommend_topk: K exceeds candidate count");

  std::vector<std::pair<double, int>> scored;
  scored.reserve(candidates);
  for (int v = 0; v < p.n; ++v) {
    if (std::binary_search(exclude.begin(), exclude.end(), v)) continue;
    scored.emplace_back(score(p, u, v), v);
  }
  const auto cmp = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), cmp);
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing: little-endian binary dump, bit-exact round trip.

namespace ckpt {

inline void put_u64(std::ostream& out, std::uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

inline void put_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, 8);
  put_u64(out, bits);
}

inline double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

inline void put_vec(std::ostream& out, const std::vector<double>& xs) {
  put_u64(out, xs.size());
  for (double x : xs) put_f64(out, x);
}

inline std::vector<double> get_vec(std::istream& in) {
  std::vector<double> xs(get_u64(in));
  for (auto& x : xs) x = get_f64(in);
  return xs;
}

}  // namespace ckpt

constexpr std::uint64_t kMFCheckpointMagic = 0x41444e5a'4d460001ULL;  // "ADNZ MF" v1

inline void save_mf(const MFParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  ckpt::put_u64(out, kMFCheckpointMagic);
  ckpt::put_u64(out, static_cast<std::uint64_t>(p.m));
  ckpt::put_u64(out, static_cast<std::uint64_t>(p.n));
  ckpt::put_u64(out, static_cast<std::uint64_t>(p.d));
  ckpt::put_u64(out, static_cast<std::uint64_t>(p.adam_step));
  ckpt::put_f64(out, p.lambda1);
  ckpt::put_vec(out, p.user_emb);
  ckpt::put_vec(out, p.item_emb);
  ckpt::put_vec(out, p.adam_m_user);
  ckpt::put_vec(out, p.adam_v_user);
  ckpt::put_vec(out, p.adam_m_item);
  ckpt::put_vec(out, p.adam_v_item);
  if (!out) throw std::runtime_error("short write to " + path.string());
}

inline MFParams load_mf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  if (ckpt::get_u64(in) != kMFCheckpointMagic)
    throw std::runtime_error(path.string() + ": not a recommender checkpoint");
  MFParams p;
  p.m = static_cast<int>(ckpt::get_u64(in));
  p.n = static_cast<int>(ckpt::get_u64(in));
  p.d = static_cast<int>(ckpt::get_u64(in));
  p.adam_step = static_cast<std::int64_t>(ckpt::get_u64(in));
  p.lambda1 = ckpt::get_f64(in);
  p.user_emb = ckpt::get_vec(in);
  p.item_emb = ckpt::get_vec(in);
  p.adam_m_user = ckpt::get_vec(in);
  p.adam_v_user = ckpt::get_vec(in);
  p.adam_m_item = ckpt::get_vec(in);
  p.adam_v_item = ckpt::get_vec(in);
  if (p.user_emb.size() != static_cast<std::size_t>(p.m) * p.d ||
      p.item_emb.size() != static_cast<std::size_t>(p.n) * p.d)
    throw std::runtime_error(path.string() + ": inconsistent shapes");
  return p;
}

}  // namespace autodenoise
