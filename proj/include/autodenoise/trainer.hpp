#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "autodenoise/baselines.hpp"
#include "autodenoise/config.hpp"
#include "autodenoise/controller.hpp"
#include "autodenoise/dataio.hpp"
#include "autodenoise/eval.hpp"
#include "autodenoise/recmodel.hpp"
#include "autodenoise/rng.hpp"

namespace autodenoise {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double reward = 0.0;    // validation AUC of this epoch
  double baseline = 0.0;  // moving-average baseline used in this epoch's advantage
  double val_auc = 0.0;
};

struct WeightRow {
  NoiseLabel group = NoiseLabel::Unknown;
  double mean_weight = 0.0;
  std::size_t count = 0;
};

struct RunArtifacts {
  MFParams best_rec;
  ControllerParams best_ctl;  // meaningful only when has_controller
  bool has_controller = false;
  std::vector<EpochStats> history;
  MetricsReport final_metrics;  // on test, from the best checkpoint
  std::vector<WeightRow> weight_table;
  int best_epoch = -1;
  double best_val_auc = 0.0;
  int epochs_run = 0;
};

namespace detail {

// Uniform over items the user has not trained on; duplicates allowed
// (independent draws). The positive is a train item, so it can never appear.
inline std::vector<int> sample_negatives(const SplitDataset& split, int user,
                                         int count, Rng& rng) {
  const auto& owned = split.train_items[user];
  if (static_cast<int>(owned.size()) >= split.n)
    throw std::runtime_error("negative sampling: user " + std::to_string(user) +
                             " interacted with every item");
  std::vector<int> negs;
  negs.reserve(count);
  while (static_cast<int>(negs.size()) < count) {
    const int v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(split.n)));
    if (std::binary_search(owned.begin(), owned.end(), v)) continue;
    negs.push_back(v);
  }
  return negs;
}

}  // namespace detail

// Expected per-sample weights of a trained controller over the train set,
// grouped by ground-truth noise label. Hard: sum_a weight(a) * p_a.
// Soft: 128-draw seeded Monte Carlo mean of softplus(w).
inline std::vector<WeightRow> weight_report(const ControllerParams& ctl,
                                            const SplitDataset& split,
                                            const MFParams& rec,
                                            const TrainConfig& cfg, int epoch) {
  double sums[3] = {0.0, 0.0, 0.0};
  std::size_t counts[3] = {0, 0, 0};
  const bool hard = cfg.scheme.scheme != Scheme::AutoDenoiseS;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const Interaction& x = split.train[i];
    Rng neg_rng(derive_seed(cfg.seed, stream::kWeightReport, static_cast<std::uint64_t>(i), 0));
    const auto negs = detail::sample_negatives(split, x.user, cfg.n_neg, neg_rng);
    const LossCache cache = softmax_loss(rec, x.user, x.item, negs);
    const ControllerState state = build_state(rec, x, cache.loss, epoch, cfg.max_epochs);
    const HiddenTrace trace = forward_hidden(ctl, state);
    double expected = 0.0;
    if (hard) {
      const auto probs = hard_action_probs(ctl, trace);
      for (int a = 0; a < ctl.actions; ++a)
        expected += hard_action_weight(a, ctl.actions) * probs[a];
    } else {
      const SoftHeads heads = soft_head_outputs(ctl, trace);
      Rng srng(derive_seed(cfg.seed, stream::kWeightReport, static_cast<std::uint64_t>(i), 1));
      constexpr int kDraws = 128;
      double sum = 0.0;
      const double sigma = std::sqrt(heads.sigma2);
      for (int k = 0; k < kDraws; ++k)
        sum += softplus(heads.mu + sigma * srng.next_normal());
      expected = sum / kDraws;
    }
    const int g = static_cast<int>(x.noise);
    sums[g] += expected;
    ++counts[g];
  }
  std::vector<WeightRow> rows;
  for (NoiseLabel label : {NoiseLabel::TruePositive, NoiseLabel::FalsePositive,
                           NoiseLabel::Unknown}) {
    const int g = static_cast<int>(label);
    if (counts[g] == 0) continue;
    rows.push_back({label, sums[g] / static_cast<double>(counts[g]), counts[g]});
  }
  return rows;
}

// One training run: Algorithm-style alternation. Every epoch runs |D|/B
// weighted minibatch updates of the recommender with the controller (or
// baseline scheme) supplying weights, then scores the validation AUC; for
// AutoDenoise the AUC becomes the REINFORCE reward, the controller takes one
// update under the pre-update baseline, and the baseline decays toward the
// reward. Early stopping watches the validation AUC with min_delta slack.
inline RunArtifacts run_training(const TrainConfig& cfg, const SplitDataset& split,
                                 std::ostream* progress = nullptr) {
  validate_config(cfg);
  if (split.train.empty()) throw std::invalid_argument("run_training: empty train split");
  if (split.validation.empty())
    throw std::invalid_argument("run_training: empty validation split (no reward signal)");
  if (split.test.empty()) throw std::invalid_argument("run_training: empty test split");

  const Scheme scheme = cfg.scheme.scheme;
  const bool uses_controller = is_autodenoise(scheme);

  MFParams rec = init_params(split.m, split.n, cfg.d,
                             derive_seed(cfg.seed, stream::kInitRecommender),
                             cfg.init_scale);
  rec.lambda1 = cfg.lambda1;

  ControllerParams ctl;
  if (uses_controller) {
    ctl = init_controller(2 * cfg.d + 2, cfg.hidden1, cfg.hidden2, cfg.actions,
                          derive_seed(cfg.seed, stream::kInitController),
                          cfg.init_scale);
    ctl.lambda2 = cfg.lambda2;
  }

  std::vector<std::int64_t> item_freq;
  if (scheme == Scheme::Heuristic) {
    item_freq.assign(split.n, 0);
    for (const auto& x : split.train) ++item_freq[x.item];
  }

  RunArtifacts out;
  out.has_controller = uses_controller;
  MFParams best_rec;
  ControllerParams best_ctl;
  double best_auc = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_improve = 0;

  const std::size_t total = split.train.size();
  std::vector<std::size_t> order(total);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, stream::kShuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpisodeLog episode;
    episode.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < total; start += cfg.batch_size) {
      const std::size_t end = std::min(total, start + cfg.batch_size);
      const std::size_t bsz = end - start;
      std::vector<BatchSample> batch(bsz);
      std::vector<double> losses(bsz), pos_probs(bsz);
      std::vector<int> items(bsz);

      for (std::size_t i = 0; i < bsz; ++i) {
        const std::size_t pos = start + i;  // position in the epoch stream
        const Interaction& x = split.train[order[pos]];
        Rng neg_rng(derive_seed(cfg.seed, stream::kNegative,
                                static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(pos)));
        batch[i].user = x.user;
        batch[i].pos = x.item;
        batch[i].negs = detail::sample_negatives(split, x.user, cfg.n_neg, neg_rng);
        const LossCache cache = softmax_loss(rec, x.user, x.item, batch[i].negs);
        losses[i] = cache.loss;
        pos_probs[i] = cache.probs[0];
        items[i] = x.item;
      }

      std::vector<double> weights;
      switch (scheme) {
        case Scheme::Default:
          weights = default_weights(bsz);
          break;
        case Scheme::Heuristic:
          weights = heuristic_weights(item_freq, items);
          break;
        case Scheme::AdtTl:
          weights = adt_tl_weights(losses, epoch, cfg.scheme.adt_tl_slope,
                                   cfg.scheme.adt_tl_max);
          break;
        case Scheme::AdtRl:
          weights = adt_rl_weights(pos_probs, cfg.scheme.adt_rl_beta);
          break;
        case Scheme::AutoDenoiseH:
        case Scheme::AutoDenoiseS: {
          weights.resize(bsz);
          for (std::size_t i = 0; i < bsz; ++i) {
            const std::size_t pos = start + i;
            const Interaction& x = split.train[order[pos]];
            const ControllerState state =
                build_state(rec, x, losses[i], epoch, cfg.max_epochs);
            const HiddenTrace trace = forward_hidden(ctl, state);
            Rng act_rng(derive_seed(cfg.seed, stream::kAction,
                                    static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(pos)));
            const ActionSample s = scheme == Scheme::AutoDenoiseH
                                       ? sample_hard(ctl, trace, act_rng)
                                       : sample_soft(ctl, trace, act_rng);
            if (s.sigma_clamped) ++ctl.sigma_clamp_count;
            weights[i] = s.weight;
            episode.traces.push_back({x.user, x.item,
                                      static_cast<std::int64_t>(pos), s.mode,
                                      s.action, s.raw, s.log_prob});
          }
          break;
        }
      }

      const BatchLossResult bl = weighted_batch_loss(rec, batch, weights);
      if (!std::isfinite(bl.value))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batches));
      adam_step(rec, bl.grad, cfg.lr);
      loss_sum += bl.value;
      ++batches;
    }

    const double train_loss = loss_sum / static_cast<double>(batches);
    const double reward = auc_reward(rec, split.validation, split.train_items,
                                     cfg.n_neg_eval, cfg.seed);
    if (!std::isfinite(reward))
      throw std::runtime_error("training diverged: non-finite reward at epoch " +
                               std::to_string(epoch));
    const double baseline_used = uses_controller ? ctl.baseline : 0.0;

    if (uses_controller) {
      episode.reward = reward;
      episode.baseline = ctl.baseline;
      const StateRebuilder rebuild = [&](const SampleTrace& tr) {
        Rng neg_rng(derive_seed(cfg.seed, stream::kNegative,
                                static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(tr.sample_index)));
        const auto negs = detail::sample_negatives(split, tr.user, cfg.n_neg, neg_rng);
        const LossCache cache = softmax_loss(rec, tr.user, tr.item, negs);
        Interaction x;
        x.user = tr.user;
        x.item = tr.item;
        return build_state(rec, x, cache.loss, epoch, cfg.max_epochs);
      };
      reinforce_update(ctl, episode, rebuild, cfg.lr_c);
      ctl.baseline = update_baseline(ctl.baseline, reward, cfg.baseline_decay);
    }

    out.history.push_back({epoch, train_loss, reward, baseline_used, reward});
    ++out.epochs_run;

    const bool new_max = reward > best_auc;
    const bool improved = reward > best_auc + cfg.min_delta;
    if (new_max) {
      best_auc = reward;
      best_epoch = epoch;
      best_rec = rec;
      if (uses_controller) best_ctl = ctl;
    }
    since_improve = improved ? 0 : since_improve + 1;

    if (progress) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - epoch_start)
                          .count();
      *progress << "[train] epoch " << epoch << " loss " << train_loss
                << " val_auc " << reward << " best " << best_auc << " ("
                << ms << " ms)\n";
    }
    if (since_improve >= cfg.patience) break;
  }

  out.best_rec = std::move(best_rec);
  if (uses_controller) out.best_ctl = std::move(best_ctl);
  out.best_epoch = best_epoch;
  out.best_val_auc = best_auc;
  out.final_metrics = rank_metrics(out.best_rec, split.test, split.train_items, cfg.ks);
  out.final_metrics.auc = best_auc;
  if (uses_controller)
    out.weight_table = weight_report(out.best_ctl, split, out.best_rec, cfg, best_epoch);
  return out;
}

inline RunArtifacts train_autodenoise(const TrainConfig& cfg,
                                      const SplitDataset& split,
                                      std::ostream* progress = nullptr) {
  if (!is_autodenoise(cfg.scheme.scheme))
    throw std::invalid_argument("train_autodenoise: scheme must be autodenoise_h or autodenoise_s");
  return run_training(cfg, split, progress);
}

inline RunArtifacts train_baseline(const TrainConfig& cfg,
                                   const SplitDataset& split,
                                   std::ostream* progress = nullptr) {
  if (is_autodenoise(cfg.scheme.scheme))
    throw std::invalid_argument("train_baseline: scheme must be a baseline scheme");
  return run_training(cfg, split, progress);
}

struct SweepRow {
  int actions = 0;
  double ndcg20 = 0.0;
};

// One full hard-action run per action-space size, fixed seed; reports test
// NDCG@20 like the ablation the action sizes are judged by.
inline std::vector<SweepRow> action_space_sweep(TrainConfig cfg,
                                                const SplitDataset& split,
                                                const std::vector<int>& a_values,
                                                std::ostream* progress = nullptr) {
  cfg.scheme.scheme = Scheme::AutoDenoiseH;
  if (std::find(cfg.ks.begin(), cfg.ks.end(), 20) == cfg.ks.end()) {
    cfg.ks.push_back(20);
    std::sort(cfg.ks.begin(), cfg.ks.end());
  }
  std::vector<SweepRow> rows;
  for (int a : a_values) {
    cfg.actions = a;
    const RunArtifacts run = run_training(cfg, split, progress);
    for (const auto& km : run.final_metrics.at_k)
      if (km.k == 20) rows.push_back({a, km.ndcg});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Run-directory artifacts. All files are deterministic functions of (config,
// split, seed); wall-clock timing goes to the progress stream only, so the
// wall_ms column is pinned to 0.

namespace detail {

inline std::string fmt_g(double x, int significant) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, x);
  return buf;
}

}  // namespace detail

inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,reward,baseline,val_auc,wall_ms\n";
  for (const auto& e : history)
    out << e.epoch << ',' << detail::fmt_g(e.train_loss, 17) << ','
        << detail::fmt_g(e.reward, 17) << ',' << detail::fmt_g(e.baseline, 17)
        << ',' << detail::fmt_g(e.val_auc, 17) << ",0\n";
}

// Table-style metrics row per K: precision/recall/ndcg as percentages with 4
// significant digits, F1 as a raw fraction.
inline void write_metrics_csv(const std::filesystem::path& path,
                              const TrainConfig& cfg, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "scheme,dataset,seed,k,precision_pct,recall_pct,f1,ndcg_pct,val_auc,targets,skipped\n";
  for (const auto& km : report.at_k)
    out << scheme_name(cfg.scheme.scheme) << ',' << cfg.dataset << ',' << cfg.seed
        << ',' << km.k << ',' << detail::fmt_g(100.0 * km.precision, 4) << ','
        << detail::fmt_g(100.0 * km.recall, 4) << ',' << detail::fmt_g(km.f1, 4)
        << ',' << detail::fmt_g(100.0 * km.ndcg, 4) << ','
        << detail::fmt_g(report.auc, 17) << ',' << report.targets << ','
        << report.skipped << '\n';
}

inline void write_weight_csv(const std::filesystem::path& path,
                             const std::vector<WeightRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "group,mean_weight,count\n";
  for (const auto& r : rows)
    out << (r.group == NoiseLabel::TruePositive
                ? "tp"
                : r.group == NoiseLabel::FalsePositive ? "fp" : "unknown")
        << ',' << detail::fmt_g(r.mean_weight, 6) << ',' << r.count << '\n';
}

inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "actions,ndcg20_pct\n";
  for (const auto& r : rows)
    out << r.actions << ',' << detail::fmt_g(100.0 * r.ndcg20, 4) << '\n';
}

// Trains and lays down the full run directory: config echo, per-epoch
// history, final metrics, checkpoints, and (for AutoDenoise schemes) the
// TP/FP expected-weight table.
inline RunArtifacts run_and_save(const TrainConfig& cfg, const SplitDataset& split,
                                 const std::filesystem::path& run_dir,
                                 std::ostream* progress = nullptr) {
  RunArtifacts run = run_training(cfg, split, progress);
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream out(run_dir / "config.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config.txt");
    out << render_config(cfg);
  }
  write_history_csv(run_dir / "history.csv", run.history);
  write_metrics_csv(run_dir / "metrics.csv", cfg, run.final_metrics);
  save_mf(run.best_rec, run_dir / "recmodel.ckpt");
  if (run.has_controller) {
    save_controller(run.best_ctl, run_dir / "controller.ckpt");
    write_weight_csv(run_dir / "weights.csv", run.weight_table);
  }
  return run;
}

}  // namespace autodenoise
