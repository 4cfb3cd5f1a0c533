#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "autodenoise/dataio.hpp"
#include "autodenoise/recmodel.hpp"
#include "autodenoise/rng.hpp"

namespace autodenoise {

// Per-sample state fed to the controller: the pair's embeddings (read-only
// snapshots of the recommender), its current loss, and the normalized epoch.
struct ControllerState {
  std::vector<double> features;  // length 2d + 2
};

inline ControllerState build_state(const MFParams& p, const Interaction& x,
                                   double current_loss, int epoch,
                                   int max_epochs) {
  if (!std::isfinite(current_loss))
    throw std::invalid_argument("build_state: non-finite loss");
  if (max_epochs < 1 || epoch < 0 || epoch > max_epochs)
    throw std::invalid_argument("build_state: epoch outside [0, max_epochs]");
  ControllerState s;
  s.features.reserve(2 * p.d + 2);
  const double* eu = p.user_row(x.user);
  const double* ev = p.item_row(x.item);
  s.features.insert(s.features.end(), eu, eu + p.d);
  s.features.insert(s.features.end(), ev, ev + p.d);
  s.features.push_back(current_loss);
  s.features.push_back(static_cast<double>(epoch) / static_cast<double>(max_epochs));
  return s;
}

// One tensor plus its Adam moments.
struct Param {
  std::vector<double> value, m, v;
  explicit Param(std::size_t size = 0) : value(size, 0.0), m(size, 0.0), v(size, 0.0) {}
};

// Two-hidden-layer ReLU MLP with a categorical head (hard actions) and
// Gaussian mean/variance heads (soft actions). Both heads always exist; the
// mode is chosen at sampling time.
struct ControllerParams {
  int in_dim = 0, h1 = 0, h2 = 0, actions = 0;
  Param w1, b1;      // h1 x in_dim, h1
  Param w2, b2;      // h2 x h1, h2
  Param w_hard;      // actions x h2 (logits, no bias)
  Param w_mu, b_mu;  // h2, 1
  Param w_var, b_var;
  double lambda2 = 1e-5;
  std::int64_t adam_step = 0;
  double baseline = 0.0;
  std::int64_t sigma_clamp_count = 0;  // diagnostics: softplus underflows
};

// Gradient buffer with the same tensor layout as ControllerParams.
struct ControllerGrad {
  std::vector<double> w1, b1, w2, b2, w_hard, w_mu, b_mu, w_var, b_var;
};

template <class Fn>
void visit_params(ControllerParams& p, ControllerGrad& g, Fn&& fn) {
  fn(p.w1, g.w1);
  fn(p.b1, g.b1);
  fn(p.w2, g.w2);
  fn(p.b2, g.b2);
  fn(p.w_hard, g.w_hard);
  fn(p.w_mu, g.w_mu);
  fn(p.b_mu, g.b_mu);
  fn(p.w_var, g.w_var);
  fn(p.b_var, g.b_var);
}

template <class CP, class Fn>
void for_each_tensor(CP& p, Fn&& fn) {
  fn(p.w1);
  fn(p.b1);
  fn(p.w2);
  fn(p.b2);
  fn(p.w_hard);
  fn(p.w_mu);
  fn(p.b_mu);
  fn(p.w_var);
  fn(p.b_var);
}

inline ControllerGrad zero_grad(const ControllerParams& p) {
  ControllerGrad g;
  g.w1.assign(p.w1.value.size(), 0.0);
  g.b1.assign(p.b1.value.size(), 0.0);
  g.w2.assign(p.w2.value.size(), 0.0);
  g.b2.assign(p.b2.value.size(), 0.0);
  g.w_hard.assign(p.w_hard.value.size(), 0.0);
  g.w_mu.assign(p.w_mu.value.size(), 0.0);
  g.b_mu.assign(p.b_mu.value.size(), 0.0);
  g.w_var.assign(p.w_var.value.size(), 0.0);
  g.b_var.assign(p.b_var.value.size(), 0.0);
  return g;
}

inline ControllerParams init_controller(int in_dim, int h1, int h2, int actions,
                                        std::uint64_t seed,
                                        double init_scale = 0.1) {
  if (in_dim < 1 || h1 < 1 || h2 < 1 || actions < 1)
    throw std::invalid_argument("init_controller: bad shape");
  ControllerParams p;
  p.in_dim = in_dim;
  p.h1 = h1;
  p.h2 = h2;
  p.actions = actions;
  p.w1 = Param(static_cast<std::size_t>(h1) * in_dim);
  p.b1 = Param(h1);
  p.w2 = Param(static_cast<std::size_t>(h2) * h1);
  p.b2 = Param(h2);
  p.w_hard = Param(static_cast<std::size_t>(actions) * h2);
  p.w_mu = Param(h2);
  p.b_mu = Param(1);
  p.w_var = Param(h2);
  p.b_var = Param(1);
  Rng rng(seed);
  for (auto* t : {&p.w1, &p.w2, &p.w_hard, &p.w_mu, &p.w_var})
    for (auto& x : t->value) x = rng.next_normal() * init_scale;
  return p;
}

// Forward pass with the intermediates needed by the backward pass.
struct HiddenTrace {
  std::vector<double> x, pre1, act1, h;
};

inline HiddenTrace forward_hidden(const ControllerParams& p,
                                  const ControllerState& state) {
  if (static_cast<int>(state.features.size()) != p.in_dim)
    throw std::invalid_argument("forward_hidden: state length != in_dim");
  HiddenTrace t;
  t.x = state.features;
  t.pre1.assign(p.h1, 0.0);
  for (int i = 0; i < p.h1; ++i) {
    double acc = p.b1.value[i];
    const double* row = p.w1.value.data() + static_cast<std::size_t>(i) * p.in_dim;
    for (int j = 0; j < p.in_dim; ++j) acc += row[j] * t.x[j];
    t.pre1[i] = acc;
  }
  t.act1.resize(p.h1);
  for (int i = 0; i < p.h1; ++i) t.act1[i] = t.pre1[i] > 0.0 ? t.pre1[i] : 0.0;
  t.h.assign(p.h2, 0.0);
  for (int i = 0; i < p.h2; ++i) {
    double acc = p.b2.value[i];
    const double* row = p.w2.value.data() + static_cast<std::size_t>(i) * p.h1;
    for (int j = 0; j < p.h1; ++j) acc += row[j] * t.act1[j];
    t.h[i] = acc;
  }
  for (double x : t.h)
    if (!std::isfinite(x))
      throw std::runtime_error("forward_hidden: non-finite hidden output");
  return t;
}

enum class ActionMode { Hard, Soft };

// Hard action a maps to the training weight a (delete / keep / duplicate),
// except the degenerate single-action space whose only action is "keep".
inline double hard_action_weight(int action, int actions) {
  return actions == 1 ? 1.0 : static_cast<double>(action);
}

struct ActionSample {
  ActionMode mode = ActionMode::Hard;
  int action = 0;      // hard: index in [0, A)
  double raw = 0.0;    // soft: the Gaussian draw, before softplus
  double weight = 0.0;
  double log_prob = 0.0;
  std::vector<double> probs;  // hard: softmax over actions
  double mu = 0.0, sigma2 = 0.0, var_pre = 0.0;  // soft head outputs
  bool sigma_clamped = false;
};

namespace detail {

inline std::vector<double> hard_logits(const ControllerParams& p,
                                       const HiddenTrace& t) {
  std::vector<double> logits(p.actions, 0.0);
  for (int a = 0; a < p.actions; ++a) {
    const double* row = p.w_hard.value.data() + static_cast<std::size_t>(a) * p.h2;
    double acc = 0.0;
    for (int j = 0; j < p.h2; ++j) acc += row[j] * t.h[j];
    logits[a] = acc;
  }
  return logits;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    denom += out[i];
  }
  for (auto& x : out) x /= denom;
  return out;
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline void soft_heads(const ControllerParams& p, const HiddenTrace& t,
                       ActionSample& s) {
  double mu = p.b_mu.value[0], var_pre = p.b_var.value[0];
  for (int j = 0; j < p.h2; ++j) {
    mu += p.w_mu.value[j] * t.h[j];
    var_pre += p.w_var.value[j] * t.h[j];
  }
  s.mu = mu;
  s.var_pre = var_pre;
  s.sigma2 = softplus(var_pre);
  if (s.sigma2 < 1e-8) {
    s.sigma2 = 1e-8;
    s.sigma_clamped = true;
  }
}

inline double gaussian_log_density(double x, double mu, double sigma2) {
  const double diff = x - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) -
         diff * diff / (2.0 * sigma2);
}

}  // namespace detail

inline ActionSample sample_hard(const ControllerParams& p, const HiddenTrace& t,
                                Rng& rng) {
  ActionSample s;
  s.mode = ActionMode::Hard;
  s.probs = detail::softmax(detail::hard_logits(p, t));
  const double u = rng.next_double();
  double cum = 0.0;
  s.action = p.actions - 1;
  for (int a = 0; a < p.actions; ++a) {
    cum += s.probs[a];
    if (u < cum) {
      s.action = a;
      break;
    }
  }
  s.weight = hard_action_weight(s.action, p.actions);
  s.log_prob = std::log(s.probs[s.action]);
  return s;
}

inline ActionSample sample_soft(const ControllerParams& p, const HiddenTrace& t,
                                Rng& rng) {
  ActionSample s;
  s.mode = ActionMode::Soft;
  detail::soft_heads(p, t, s);
  s.raw = s.mu + std::sqrt(s.sigma2) * rng.next_normal();
  s.weight = detail::softplus(s.raw);
  // Gaussian density of the raw draw; the final softplus squashing carries no
  // Jacobian term in this policy.
  s.log_prob = detail::gaussian_log_density(s.raw, s.mu, s.sigma2);
  return s;
}

inline double softplus(double x) { return detail::softplus(x); }

inline std::vector<double> hard_action_probs(const ControllerParams& p,
                                             const HiddenTrace& t) {
  return detail::softmax(detail::hard_logits(p, t));
}

struct SoftHeads {
  double mu = 0.0;
  double sigma2 = 0.0;
  bool clamped = false;
};

inline SoftHeads soft_head_outputs(const ControllerParams& p,
                                   const HiddenTrace& t) {
  ActionSample s;
  detail::soft_heads(p, t, s);
  return {s.mu, s.sigma2, s.sigma_clamped};
}

// Recomputes the distribution parameters for a stored action under the given
// trace, keeping the sampled action/raw value fixed.
inline ActionSample replay_action(const ControllerParams& p,
                                  const HiddenTrace& t, ActionMode mode,
                                  int action, double raw) {
  ActionSample s;
  s.mode = mode;
  if (mode == ActionMode::Hard) {
    s.probs = detail::softmax(detail::hard_logits(p, t));
    s.action = action;
    s.weight = hard_action_weight(action, p.actions);
    s.log_prob = std::log(s.probs[action]);
  } else {
    detail::soft_heads(p, t, s);
    s.raw = raw;
    s.weight = detail::softplus(raw);
    s.log_prob = detail::gaussian_log_density(raw, s.mu, s.sigma2);
  }
  return s;
}

// Accumulates d log P(action | phi) / d phi into `out`. Hard head: the
// softmax-categorical score (delta - p) propagated through the logits layer.
// Soft head: Gaussian score d/dmu = (w-mu)/sigma2,
// d/dsigma2 = ((w-mu)^2 - sigma2) / (2 sigma2^2), chained through the
// softplus of the variance head. The state itself is a constant.
inline void accumulate_logprob_grad(const ControllerParams& p,
                                    const ActionSample& s,
                                    const HiddenTrace& t, ControllerGrad& out) {
  std::vector<double> gh(p.h2, 0.0);
  if (s.mode == ActionMode::Hard) {
    for (int a = 0; a < p.actions; ++a) {
      const double glogit = (a == s.action ? 1.0 : 0.0) - s.probs[a];
      const double* row = p.w_hard.value.data() + static_cast<std::size_t>(a) * p.h2;
      double* grow = out.w_hard.data() + static_cast<std::size_t>(a) * p.h2;
      for (int j = 0; j < p.h2; ++j) {
        grow[j] += glogit * t.h[j];
        gh[j] += glogit * row[j];
      }
    }
  } else {
    const double diff = s.raw - s.mu;
    const double gmu = diff / s.sigma2;
    const double gsigma2 = (diff * diff - s.sigma2) / (2.0 * s.sigma2 * s.sigma2);
    // derivative of softplus; zero in the clamped (underflowed) region
    const double dvar = s.sigma_clamped ? 0.0 : 1.0 / (1.0 + std::exp(-s.var_pre));
    const double gt_pre = gsigma2 * dvar;
    for (int j = 0; j < p.h2; ++j) {
      out.w_mu[j] += gmu * t.h[j];
      out.w_var[j] += gt_pre * t.h[j];
      gh[j] += gmu * p.w_mu.value[j] + gt_pre * p.w_var.value[j];
    }
    out.b_mu[0] += gmu;
    out.b_var[0] += gt_pre;
  }

  // through h = w2 * relu(w1 x + b1) + b2
  std::vector<double> gz(p.h1, 0.0);
  for (int i = 0; i < p.h2; ++i) {
    const double ghi = gh[i];
    const double* row = p.w2.value.data() + static_cast<std::size_t>(i) * p.h1;
    double* grow = out.w2.data() + static_cast<std::size_t>(i) * p.h1;
    for (int j = 0; j < p.h1; ++j) {
      grow[j] += ghi * t.act1[j];
      gz[j] += ghi * row[j];
    }
    out.b2[i] += ghi;
  }
  for (int i = 0; i < p.h1; ++i) {
    if (t.pre1[i] <= 0.0) continue;
    const double gy = gz[i];
    double* grow = out.w1.data() + static_cast<std::size_t>(i) * p.in_dim;
    for (int j = 0; j < p.in_dim; ++j) grow[j] += gy * t.x[j];
    out.b1[i] += gy;
  }
}

inline ControllerGrad logprob_backward(const ControllerParams& p,
                                       const ActionSample& s,
                                       const HiddenTrace& t) {
  ControllerGrad g = zero_grad(p);
  accumulate_logprob_grad(p, s, t, g);
  return g;
}

// What the training loop stores per sample: enough to rebuild the state and
// the action deterministically at update time.
struct SampleTrace {
  int user = 0;
  int item = 0;
  std::int64_t sample_index = 0;  // position in the epoch stream
  ActionMode mode = ActionMode::Hard;
  int action = 0;
  double raw = 0.0;
  double log_prob = 0.0;
};

struct EpisodeLog {
  std::vector<SampleTrace> traces;
  double reward = 0.0;    // validation AUC after the epoch
  double baseline = 0.0;  // moving-average baseline used in the advantage
  int epoch = 0;
};

// b' = gamma * b + (1 - gamma) * R
inline double update_baseline(double b, double reward, double gamma) {
  return gamma * b + (1.0 - gamma) * reward;
}

using StateRebuilder = std::function<ControllerState(const SampleTrace&)>;

// REINFORCE ascent with baseline, applied through Adam:
//   grad = -(R - b)/N * sum_i d log P(w_i | phi) - 2 lambda2 phi (as descent)
// States are rebuilt through `rebuild` under the epoch's frozen phi.
inline void reinforce_update(ControllerParams& p, const EpisodeLog& episode,
                             const StateRebuilder& rebuild, double lr_c,
                             double beta1 = 0.9, double beta2 = 0.999,
                             double eps = 1e-8) {
  if (lr_c <= 0.0) throw std::invalid_argument("reinforce_update: lr_c must be > 0");
  ControllerGrad acc = zero_grad(p);
  for (const auto& trace : episode.traces) {
    const ControllerState state = rebuild(trace);
    const HiddenTrace t = forward_hidden(p, state);
    const ActionSample s = replay_action(p, t, trace.mode, trace.action, trace.raw);
    if (s.mode == ActionMode::Soft && s.sigma_clamped) ++p.sigma_clamp_count;
    accumulate_logprob_grad(p, s, t, acc);
  }
  const double advantage = episode.reward - episode.baseline;
  const double scale = episode.traces.empty()
                           ? 0.0
                           : advantage / static_cast<double>(episode.traces.size());

  ++p.adam_step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.adam_step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.adam_step));
  visit_params(p, acc, [&](Param& param, std::vector<double>& g) {
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double descent = -scale * g[i] + 2.0 * p.lambda2 * param.value[i];
      if (!std::isfinite(descent))
        throw std::runtime_error("reinforce_update: non-finite gradient");
      param.m[i] = beta1 * param.m[i] + (1.0 - beta1) * descent;
      param.v[i] = beta2 * param.v[i] + (1.0 - beta2) * descent * descent;
      param.value[i] -= lr_c * (param.m[i] / bc1) / (std::sqrt(param.v[i] / bc2) + eps);
    }
  });
}

// ---------------------------------------------------------------------------
// Checkpointing

constexpr std::uint64_t kControllerCheckpointMagic = 0x41444e5a'43540001ULL;  // "ADNZ CT" v1

inline void save_controller(const ControllerParams& p,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  ckpt::put_u64(out, kControllerCheckpointMagic);
  for (int dim : {p.in_dim, p.h1, p.h2, p.actions})
    ckpt::put_u64(out, static_cast<std::uint64_t>(dim));
  ckpt::put_u64(out, static_cast<std::uint64_t>(p.adam_step));
  ckpt::put_f64(out, p.lambda2);
  ckpt::put_f64(out, p.baseline);
  for_each_tensor(p, [&](const Param& param) {
    ckpt::put_vec(out, param.value);
    ckpt::put_vec(out, param.m);
    ckpt::put_vec(out, param.v);
  });
  if (!out) throw std::runtime_error("short write to " + path.string());
}

inline ControllerParams load_controller(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  if (ckpt::get_u64(in) != kControllerCheckpointMagic)
    throw std::runtime_error(path.string() + ": not a controller checkpoint");
  const int in_dim = static_cast<int>(ckpt::get_u64(in));
  const int h1 = static_cast<int>(ckpt::get_u64(in));
  const int h2 = static_cast<int>(ckpt::get_u64(in));
  const int actions = static_cast<int>(ckpt::get_u64(in));
  ControllerParams p = init_controller(in_dim, h1, h2, actions, 0, 0.0);
  p.adam_step = static_cast<std::int64_t>(ckpt::get_u64(in));
  p.lambda2 = ckpt::get_f64(in);
  p.baseline = ckpt::get_f64(in);
  for_each_tensor(p, [&](Param& param) {
    param.value = ckpt::get_vec(in);
    param.m = ckpt::get_vec(in);
    param.v = ckpt::get_vec(in);
  });
  return p;
}

}  // namespace autodenoise
