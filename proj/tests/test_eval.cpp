#include <doctest.h>

#include <cmath>

#include "autodenoise/eval.hpp"
#include "support.hpp"

using namespace autodenoise;

namespace {

// random recommender plus targets over a small item universe
struct EvalInstance {
  MFParams params;
  std::vector<Interaction> targets;
  std::vector<std::vector<int>> train_items;
};

EvalInstance random_eval_instance(std::uint64_t seed, int users, int items,
                                  int n_targets) {
  EvalInstance inst;
  inst.params = init_params(users, items, 3, derive_seed(seed, 1), 0.4);
  inst.train_items.assign(users, {});
  Rng rng(derive_seed(seed, 2));
  for (int u = 0; u < users; ++u) {
    for (int v = 0; v < items; ++v)
      if (rng.next_double() < 0.25) inst.train_items[u].push_back(v);
  }
  while (static_cast<int>(inst.targets.size()) < n_targets) {
    Interaction t;
    t.user = static_cast<int>(rng.next_below(users));
    t.item = static_cast<int>(rng.next_below(items));
    if (std::binary_search(inst.train_items[t.user].begin(),
                           inst.train_items[t.user].end(), t.item))
      continue;
    inst.targets.push_back(t);
  }
  return inst;
}

}  // namespace

TEST_CASE("rank_metrics on a perfect ranker") {
  // d = 1: each user's target item has the dominant embedding
  MFParams p = init_params(3, 12, 1, 1, 0.0);
  for (int u = 0; u < 3; ++u) p.user_emb[u] = 1.0;
  std::vector<Interaction> test;
  std::vector<std::vector<int>> train_items(3);
  for (int u = 0; u < 3; ++u) {
    Interaction t;
    t.user = u;
    t.item = u;
    p.item_emb[u] = 100.0 + u;
    test.push_back(t);
  }
  const MetricsReport r = rank_metrics(p, test, train_items, {10});
  CHECK(r.at_k[0].precision == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.at_k[0].recall == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.at_k[0].ndcg == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.targets == 3);
  CHECK(r.skipped == 0);
}

TEST_CASE("rank_metrics when the target never makes the list") {
  MFParams p = init_params(1, 30, 1, 1, 0.0);
  p.user_emb[0] = 1.0;
  for (int v = 0; v < 30; ++v) p.item_emb[v] = static_cast<double>(30 - v);
  Interaction t;
  t.user = 0;
  t.item = 29;  // lowest score, rank 30
  const MetricsReport r = rank_metrics(p, {t}, {{}}, {10, 20});
  for (const auto& km : r.at_k) {
    CHECK(km.precision == 0.0);
    CHECK(km.recall == 0.0);
    CHECK(km.f1 == 0.0);
    CHECK(km.ndcg == 0.0);
  }
}

TEST_CASE("rank_metrics equals the full-sort oracle") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const EvalInstance inst = random_eval_instance(seed, 4, 20, 5);
    for (int k : {1, 3, 10}) {
      const MetricsReport r =
          rank_metrics(inst.params, inst.targets, inst.train_items, {k});
      const support::BruteMetrics oracle =
          support::brute_rank_metrics(inst.params, inst.targets, inst.train_items, k);
      CHECK(r.at_k[0].precision == oracle.precision);
      CHECK(r.at_k[0].recall == oracle.recall);
      CHECK(r.at_k[0].f1 == oracle.f1);
      CHECK(r.at_k[0].ndcg == oracle.ndcg);
    }
  }
}

TEST_CASE("single-target evaluation forces recall = K * precision") {
  const EvalInstance inst = random_eval_instance(77, 5, 25, 8);
  const MetricsReport r =
      rank_metrics(inst.params, inst.targets, inst.train_items, {10, 20});
  for (const auto& km : r.at_k)
    CHECK(km.recall == doctest::Approx(km.k * km.precision).epsilon(1e-12));
}

TEST_CASE("rank_metrics counts unrankable targets as skipped") {
  MFParams p = init_params(2, 3, 1, 1, 0.1);
  std::vector<std::vector<int>> train_items{{0, 1, 2}, {0}};
  Interaction blocked;   // user 0 trained on every item
  blocked.user = 0;
  blocked.item = 1;
  Interaction fine;
  fine.user = 1;
  fine.item = 2;
  const MetricsReport r = rank_metrics(p, {blocked, fine}, train_items, {2});
  CHECK(r.skipped == 1);
  CHECK(r.targets == 1);
}

TEST_CASE("improving the target score never hurts ndcg") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EvalInstance inst = random_eval_instance(seed + 500, 3, 15, 4);
    const MetricsReport before =
        rank_metrics(inst.params, inst.targets, inst.train_items, {5});
    // push every target's item embedding toward its user's embedding
    for (const auto& t : inst.targets)
      for (int k = 0; k < inst.params.d; ++k)
        inst.params.item_row(t.item)[k] += 0.5 * inst.params.user_row(t.user)[k];
    const MetricsReport after =
        rank_metrics(inst.params, inst.targets, inst.train_items, {5});
    CHECK(after.at_k[0].ndcg >= before.at_k[0].ndcg - 1e-12);
  }
}

TEST_CASE("auc_reward endpoints") {
  SUBCASE("positives above everything score 1") {
    MFParams p = init_params(1, 10, 1, 1, 0.0);
    p.user_emb[0] = 1.0;
    for (int v = 0; v < 10; ++v) p.item_emb[v] = v == 3 ? 10.0 : -1.0;
    Interaction pos;
    pos.user = 0;
    pos.item = 3;
    CHECK(auc_reward(p, {pos}, {{}}, 50, 1) == 1.0);
  }

  SUBCASE("all ties score one half") {
    const MFParams p = init_params(2, 8, 2, 1, 0.0);
    Interaction pos;
    pos.user = 1;
    pos.item = 0;
    CHECK(auc_reward(p, {pos}, {{}, {}}, 20, 1) == 0.5);
  }
}

TEST_CASE("auc_exhaustive equals the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const EvalInstance inst = random_eval_instance(seed + 900, 4, 18, 6);
    CHECK(auc_exhaustive(inst.params, inst.targets, inst.train_items) ==
          support::brute_auc_exhaustive(inst.params, inst.targets,
                                        inst.train_items));
  }
}

TEST_CASE("sampled auc approaches the exhaustive value") {
  const EvalInstance inst = random_eval_instance(1234, 6, 25, 20);
  const double sampled =
      auc_reward(inst.params, inst.targets, inst.train_items, 100, 5);
  const double exact =
      auc_exhaustive(inst.params, inst.targets, inst.train_items);
  CHECK(std::abs(sampled - exact) < 0.02);
}

TEST_CASE("auc depends only on score order") {
  EvalInstance inst = random_eval_instance(4321, 4, 15, 6);
  const double before =
      auc_reward(inst.params, inst.targets, inst.train_items, 40, 9);
  // scaling all embeddings applies a strictly increasing map to every score
  for (auto& x : inst.params.user_emb) x *= 2.5;
  for (auto& x : inst.params.item_emb) x *= 2.5;
  CHECK(auc_reward(inst.params, inst.targets, inst.train_items, 40, 9) == before);
}

TEST_CASE("swapping one adjacent pair moves auc by exactly 1 over #pairs") {
  // one positive, four negatives, d = 1 scores: 10 (pos), 9, 3, 2, 1
  MFParams p = init_params(1, 5, 1, 1, 0.0);
  p.user_emb[0] = 1.0;
  p.item_emb = {10.0, 9.0, 3.0, 2.0, 1.0};
  Interaction pos;
  pos.user = 0;
  pos.item = 0;
  const double before = auc_exhaustive(p, {pos}, {{}});
  CHECK(before == 1.0);
  std::swap(p.item_emb[0], p.item_emb[1]);  // pos falls behind one negative
  const double after = auc_exhaustive(p, {pos}, {{}});
  CHECK(before - after == 0.25);  // 4 pairs
}

TEST_CASE("reward sampling is frozen by the seed") {
  const EvalInstance inst = random_eval_instance(888, 5, 20, 10);
  const double a = auc_reward(inst.params, inst.targets, inst.train_items, 30, 3);
  const double b = auc_reward(inst.params, inst.targets, inst.train_items, 30, 3);
  CHECK(a == b);
}
