#include <doctest.h>

#include <cmath>

#include "autodenoise/baselines.hpp"
#include "autodenoise/rng.hpp"

using namespace autodenoise;

TEST_CASE("default_weights are all ones") {
  CHECK(default_weights(5) == std::vector<double>(5, 1.0));
  CHECK(default_weights(0).empty());
}

TEST_CASE("heuristic_weights normalize inverse frequency to batch mean 1") {
  SUBCASE("equal frequencies collapse to ones") {
    const std::vector<std::int64_t> freq{4, 4, 4};
    const auto w = heuristic_weights(freq, {0, 1, 2, 1});
    for (double x : w) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("frequencies (1, 3) give (1.5, 0.5)") {
    const std::vector<std::int64_t> freq{1, 3};
    const auto w = heuristic_weights(freq, {0, 1});
    CHECK(w[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("random batches keep mean 1") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::int64_t> freq;
      for (int i = 0; i < 20; ++i)
        freq.push_back(1 + static_cast<std::int64_t>(rng.next_below(50)));
      std::vector<int> items;
      for (int i = 0; i < 16; ++i)
        items.push_back(static_cast<int>(rng.next_below(20)));
      const auto w = heuristic_weights(freq, items);
      double mean = 0.0;
      for (double x : w) {
        CHECK(x > 0.0);
        mean += x;
      }
      mean /= static_cast<double>(w.size());
      CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("zero frequency is an error") {
    const std::vector<std::int64_t> freq{0, 2};
    CHECK_THROWS_AS(heuristic_weights(freq, {0}), std::invalid_argument);
  }
}

TEST_CASE("adt_tl_weights truncate the largest losses") {
  SUBCASE("epoch 0 drops nothing") {
    const auto w = adt_tl_weights({3.0, 1.0, 2.0}, 0, 0.05, 0.5);
    CHECK(w == std::vector<double>{1, 1, 1});
  }

  SUBCASE("saturated rate drops the top half") {
    // delta = 0.5, B = 4 -> ceil(2) = 2 largest by loss
    const auto w = adt_tl_weights({9.0, 1.0, 2.0, 8.0}, 1000, 0.05, 0.5);
    CHECK(w == std::vector<double>{0, 1, 1, 0});
  }

  SUBCASE("ties at the cut break by sample index") {
    const auto w = adt_tl_weights({5.0, 5.0, 5.0, 5.0}, 1000, 0.05, 0.5);
    CHECK(w == std::vector<double>{0, 0, 1, 1});
  }

  SUBCASE("zero-weight count equals ceil(delta * B)") {
    Rng rng(9);
    for (int trial = 0; trial < 40; ++trial) {
      const int b = 1 + static_cast<int>(rng.next_below(40));
      const int epoch = static_cast<int>(rng.next_below(30));
      std::vector<double> losses;
      for (int i = 0; i < b; ++i) losses.push_back(rng.next_double() * 5.0);
      const double slope = 0.03, max_rate = 0.4;
      const auto w = adt_tl_weights(losses, epoch, slope, max_rate);
      std::size_t zeros = 0;
      for (double x : w) {
        CHECK((x == 0.0 || x == 1.0));
        if (x == 0.0) ++zeros;
      }
      const double delta = std::min(slope * epoch, max_rate);
      CHECK(zeros == static_cast<std::size_t>(std::ceil(delta * b)));
    }
  }
}

TEST_CASE("adt_rl_weights follow p^beta") {
  SUBCASE("beta 0 reduces to the default scheme") {
    const auto w = adt_rl_weights({0.2, 0.9, 0.01}, 0.0);
    for (double x : w) CHECK(x == 1.0);
  }

  SUBCASE("confident positives keep full weight") {
    const auto w = adt_rl_weights({1.0}, 0.25);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("weights never increase with loss") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<double> probs;
      for (int i = 0; i < 12; ++i) probs.push_back(rng.next_double());
      const auto w = adt_rl_weights(probs, 0.25);
      for (std::size_t i = 0; i < probs.size(); ++i)
        for (std::size_t j = 0; j < probs.size(); ++j) {
          const double loss_i = -std::log(probs[i]);
          const double loss_j = -std::log(probs[j]);
          if (loss_i > loss_j) CHECK(w[i] <= w[j]);
        }
      for (double x : w) CHECK(x > 0.0);
    }
  }

  SUBCASE("out-of-range probabilities are clamped, not fatal") {
    const auto w = adt_rl_weights({-0.5, 2.0}, 0.5);
    CHECK(w[0] == doctest::Approx(std::pow(1e-6, 0.5)));
    CHECK(w[1] == doctest::Approx(std::pow(1.0 - 1e-6, 0.5)));
  }
}
