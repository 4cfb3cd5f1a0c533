#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace autodenoise {

enum class Scheme {
  Default,
  Heuristic,
  AdtTl,
  AdtRl,
  AutoDenoiseH,
  AutoDenoiseS,
};

struct SchemeConfig {
  Scheme scheme = Scheme::Default;
  // ADT truncated loss: drop rate delta(t) = min(slope * epoch, max_rate)
  double adt_tl_slope = 0.05;
  double adt_tl_max = 0.2;
  // ADT reweighted loss: w = p^beta with p the predicted positive probability
  double adt_rl_beta = 0.25;
};

inline bool is_autodenoise(Scheme s) {
  return s == Scheme::AutoDenoiseH || s == Scheme::AutoDenoiseS;
}

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Default: return "default";
    case Scheme::Heuristic: return "heuristic";
    case Scheme::AdtTl: return "adt_tl";
    case Scheme::AdtRl: return "adt_rl";
    case Scheme::AutoDenoiseH: return "autodenoise_h";
    case Scheme::AutoDenoiseS: return "autodenoise_s";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& name) {
  if (name == "default") return Scheme::Default;
  if (name == "heuristic") return Scheme::Heuristic;
  if (name == "adt_tl") return Scheme::AdtTl;
  if (name == "adt_rl") return Scheme::AdtRl;
  if (name == "autodenoise_h") return Scheme::AutoDenoiseH;
  if (name == "autodenoise_s") return Scheme::AutoDenoiseS;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

// No reweighting: all ones.
inline std::vector<double> default_weights(std::size_t batch_size) {
  return std::vector<double>(batch_size, 1.0);
}

// Inverse item frequency, normalized so the batch-mean weight is 1 (keeps the
// effective learning rate comparable to the default scheme).
inline std::vector<double> heuristic_weights(
    const std::vector<std::int64_t>& item_freq, const std::vector<int>& items) {
  std::vector<double> w;
  w.reserve(items.size());
  double sum = 0.0;
  for (int v : items) {
    if (v < 0 || v >= static_cast<int>(item_freq.size()) || item_freq[v] < 1)
      throw std::invalid_argument("heuristic_weights: item " + std::to_string(v) +
                                  " has zero train frequency");
    w.push_back(1.0 / static_cast<double>(item_freq[v]));
    sum += w.back();
  }
  if (!w.empty()) {
    const double scale = static_cast<double>(w.size()) / sum;
    for (auto& x : w) x *= scale;
  }
  return w;
}

// Truncated loss: the ceil(delta * B) largest-loss samples get weight 0,
// ties at the cut broken by sample index.
inline std::vector<double> adt_tl_weights(const std::vector<double>& losses,
                                          int epoch, double slope,
                                          double max_rate) {
  for (double l : losses)
    if (l < 0.0) throw std::invalid_argument("adt_tl_weights: negative loss");
  const double delta = std::min(slope * static_cast<double>(epoch), max_rate);
  const auto drop = static_cast<std::size_t>(
      std::ceil(delta * static_cast<double>(losses.size())));
  std::vector<double> w(losses.size(), 1.0);
  if (drop == 0) return w;
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return a < b;
  });
  for (std::size_t i = 0; i < drop && i < order.size(); ++i) w[order[i]] = 0.0;
  return w;
}

// Focal-style reweighting: w = p^beta where p is the model's softmax
// probability of the positive, clamped away from {0, 1}. High-loss samples
// (small p) get lighter weights.
inline std::vector<double> adt_rl_weights(const std::vector<double>& pos_probs,
                                          double beta) {
  std::vector<double> w;
  w.reserve(pos_probs.size());
  for (double p : pos_probs) {
    const double clamped = std::clamp(p, 1e-6, 1.0 - 1e-6);
    w.push_back(std::pow(clamped, beta));
  }
  return w;
}

}  // namespace autodenoise
