#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "snrdet/error.hpp"
#include "snrdet/rng.hpp"
#include "snrdet/training.hpp"

using namespace snrdet;

namespace {

// Tones of random frequency and level against silence, on short clips.
std::vector<TrainingExample> toy_set(std::size_t per_class, std::uint64_t seed) {
  std::vector<TrainingExample> out;
  Rng rng(seed, {2});
  for (std::size_t i = 0; i < per_class; ++i) {
    const auto tone = testing::sine(rng.uniform(600.0, 3000.0), rng.uniform(0.05, 1.0), 1600);
    out.push_back({mel_spectrogram(tone), 1});
    out.push_back({mel_spectrogram(AudioClip{std::vector<float>(1600, 0.0f), 8000}), 0});
  }
  return out;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("learns tone versus silence") {
    const auto train_set = toy_set(50, 1);
    const auto valid_set = toy_set(10, 2);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 1e-3;
    cfg.seed = 3;
    const auto r = train(train_set, valid_set, cfg);
    REQUIRE(r.history.size() == 30);
    CHECK(r.history.back().valid_wacc >= 0.95);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
    CHECK(r.history.back().valid_loss < r.history.front().valid_loss);
  }

  TEST_CASE("training preconditions") {
    const auto set = toy_set(3, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(set, set, cfg), InvalidArgument);
    cfg.epochs = 1;
    std::vector<TrainingExample> one_class;
    for (const auto& e : set)
      if (e.label == 1) one_class.push_back(e);
    CHECK_THROWS_AS(train(one_class, set, cfg), InvalidArgument);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(set, set, cfg), InvalidArgument);
  }

  TEST_CASE("training is deterministic and thread-count independent") {
    const auto set = toy_set(6, 4);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    const auto a = train(set, set, cfg);
    const auto b = train(set, set, cfg);
    cfg.threads = 3;
    const auto c = train(set, set, cfg);
    CHECK(a.model.params == b.model.params);
    CHECK(a.model.params == c.model.params);
    cfg.seed = 2;
    CHECK(train(set, set, cfg).model.params != a.model.params);
  }

  TEST_CASE("history csv") {
    std::ostringstream out;
    write_history_csv(out, {{1, 0.5, 0.25, 0.75, 1.0}});
    CHECK(out.str() == "epoch,train_loss,valid_loss,train_wacc,valid_wacc\n1,0.5,0.25,0.75,1\n");
  }
}
