#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "prism/train.hpp"

using namespace prism;

namespace {

// linearly separable toy set: winner embedding always has larger first coord
TrainingSet toy_set(std::size_t n, std::size_t p, std::size_t j, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(p), l(p), fw(j), fl(j);
    for (std::size_t k = 0; k < p; ++k) {
      w[k] = rng.normal();
      l[k] = rng.normal();
    }
    w[0] = std::abs(w[0]) + 0.5;
    l[0] = -std::abs(l[0]) - 0.5;
    for (std::size_t k = 0; k < j; ++k) {
      fw[k] = rng.normal();
      fl[k] = rng.normal();
    }
    data.input_w.push_back(w);
    data.input_l.push_back(l);
    data.feat_w.push_back(fw);
    data.feat_l.push_back(fl);
  }
  return data;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("prism_train_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("median heuristic widths follow the feature spread") {
  TrainingSet data;
  data.input_w = {{0.0}, {0.0}, {0.0}};
  data.input_l = {{0.0}, {0.0}, {0.0}};
  // |deltas| for channel 0: 1, 2, 4 -> median 2
  data.feat_w = {{1.0, 5.0}, {2.0, 5.0}, {4.0, 5.0}};
  data.feat_l = {{0.0, 5.0}, {0.0, 5.0}, {0.0, 5.0}};
  auto widths = median_heuristic_widths(data);
  REQUIRE(widths.size() == 2);
  REQUIRE(widths[0] == 2.0);
  REQUIRE(widths[1] == 1e-3);  // constant channel floors at epsilon

  // even count averages the middle pair: |deltas| 1, 3 -> 2
  TrainingSet even;
  even.input_w = {{0.0}, {0.0}};
  even.input_l = {{0.0}, {0.0}};
  even.feat_w = {{1.0}, {3.0}};
  even.feat_l = {{0.0}, {0.0}};
  REQUIRE(median_heuristic_widths(even)[0] == 2.0);
}

TEST_CASE("training drives the preference loss down on separable data") {
  TrainingSet data = toy_set(64, 4, 2, 42);
  TrainConfig cfg;
  cfg.mode = TrainMode::bt;
  cfg.arch = Arch::linear;
  cfg.total_steps = 500;
  cfg.batch_size = 16;
  cfg.base_lr = 0.05;
  cfg.seed = 7;
  TrainResult result = train(data, cfg);
  REQUIRE(result.history.size() == 500);
  REQUIRE(result.history.back().total_loss < 0.1);
  REQUIRE(result.history.back().total_loss < result.history.front().total_loss);
  // learned direction favors the separating coordinate
  REQUIRE(result.params.w_in[0] > 0.0);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  TrainingSet data = toy_set(32, 3, 2, 11);
  TrainConfig cfg;
  cfg.total_steps = 60;
  cfg.batch_size = 8;
  cfg.seed = 99;
  TrainResult a = train(data, cfg);
  TrainResult b = train(data, cfg);
  REQUIRE(a.params.w_in == b.params.w_in);
  REQUIRE(a.params.b_out == b.params.b_out);
  REQUIRE(a.mix.logits == b.mix.logits);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    REQUIRE(a.history[i].total_loss == b.history[i].total_loss);
    REQUIRE(a.history[i].lr == b.history[i].lr);
  }
  TrainConfig other = cfg;
  other.seed = 100;
  TrainResult c = train(data, other);
  REQUIRE(a.history.back().total_loss != c.history.back().total_loss);
}

TEST_CASE("history rows mirror the schedules") {
  TrainingSet data = toy_set(16, 3, 1, 5);
  TrainConfig cfg;
  cfg.total_steps = 40;
  cfg.batch_size = 4;
  cfg.seed = 1;
  TrainResult result = train(data, cfg);
  REQUIRE(result.history.size() == 40);
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const HistoryRow& row = result.history[i];
    REQUIRE(row.step == i);
    double t = static_cast<double>(i) / cfg.total_steps;
    REQUIRE(row.lambda1 == lambda_schedule(t, cfg.lambda1));
    REQUIRE(row.lambda2 == lambda_schedule(t, cfg.lambda2));
    REQUIRE(row.lr == lr_schedule(i, cfg.total_steps, cfg.base_lr, cfg.warmup_fraction));
    REQUIRE(std::isfinite(row.total_loss));
  }
}

TEST_CASE("plain preference mode freezes the mixture weights") {
  TrainingSet data = toy_set(24, 3, 2, 21);
  TrainConfig cfg;
  cfg.mode = TrainMode::bt;
  cfg.total_steps = 50;
  cfg.batch_size = 8;
  cfg.seed = 3;
  TrainResult result = train(data, cfg);
  for (double logit : result.mix.logits) REQUIRE(logit == 0.0);
  for (const HistoryRow& row : result.history) {
    REQUIRE(row.lambda1 == 0.0);
    REQUIRE(row.lambda2 == 0.0);
  }
}

TEST_CASE("full objective moves the mixture weights") {
  TrainingSet data = toy_set(48, 3, 2, 31);
  TrainConfig cfg;
  cfg.mode = TrainMode::prism;
  cfg.total_steps = 200;
  cfg.batch_size = 16;
  cfg.seed = 13;
  TrainResult result = train(data, cfg);
  bool moved = false;
  for (double logit : result.mix.logits)
    if (logit != 0.0) moved = true;
  REQUIRE(moved);
  REQUIRE(result.mix.widths == median_heuristic_widths(data));
}

TEST_CASE("training validates configuration against the data") {
  TrainingSet data = toy_set(8, 3, 1, 2);
  TrainConfig cfg;
  cfg.batch_size = 16;  // bigger than the data set
  REQUIRE_THROWS_AS(train(data, cfg), ConfigError);
  cfg.batch_size = 1;
  REQUIRE_THROWS_AS(validate(cfg), ConfigError);
  cfg.batch_size = 4;
  cfg.total_steps = 0;
  REQUIRE_THROWS_AS(validate(cfg), ConfigError);
  TrainingSet empty;
  TrainConfig ok;
  ok.batch_size = 2;
  ok.total_steps = 5;
  REQUIRE_THROWS_AS(train(empty, ok), DataError);
}

TEST_CASE("checkpoints round trip bitwise") {
  TrainingSet data = toy_set(32, 4, 2, 17);
  TrainConfig cfg;
  cfg.arch = Arch::one_hidden_tanh;
  cfg.hidden = 4;
  cfg.total_steps = 30;
  cfg.batch_size = 8;
  cfg.seed = 23;
  TrainResult result = train(data, cfg);

  Checkpoint chk;
  chk.params = result.params;
  chk.mix = result.mix;
  chk.standardizer.mean = {0.25, -1.5};
  chk.standardizer.stddev = {1.0, 2.0};
  chk.shortcut_names = {"alpha", "beta"};
  chk.config_echo = {{"mode", "prism"}, {"seed", 23}};

  TempDir dir;
  auto path = (dir.path / "checkpoint.json").string();
  save_checkpoint(chk, path);
  Checkpoint back = load_checkpoint(path);
  REQUIRE(back.params.arch == chk.params.arch);
  REQUIRE(back.params.w_in == chk.params.w_in);
  REQUIRE(back.params.b_hidden == chk.params.b_hidden);
  REQUIRE(back.params.w_out == chk.params.w_out);
  REQUIRE(back.params.b_out == chk.params.b_out);
  REQUIRE(back.mix.has_value());
  REQUIRE(back.mix->logits == chk.mix->logits);
  REQUIRE(back.mix->widths == chk.mix->widths);
  REQUIRE(back.standardizer.mean == chk.standardizer.mean);
  REQUIRE(back.standardizer.stddev == chk.standardizer.stddev);
  REQUIRE(back.shortcut_names == chk.shortcut_names);
  REQUIRE(back.config_echo["seed"] == 23);
}

TEST_CASE("checkpoints omit the mixture when absent") {
  Checkpoint chk;
  chk.params = zero_params(Arch::linear, 3, 0);
  chk.standardizer.mean = {0.0};
  chk.standardizer.stddev = {1.0};
  TempDir dir;
  auto path = (dir.path / "bt.json").string();
  save_checkpoint(chk, path);
  Checkpoint back = load_checkpoint(path);
  REQUIRE_FALSE(back.mix.has_value());
}

TEST_CASE("checkpoint loading rejects broken files") {
  TempDir dir;
  auto missing = (dir.path / "nope.json").string();
  REQUIRE_THROWS_AS(load_checkpoint(missing), IoError);

  auto garbled = (dir.path / "garbled.json").string();
  {
    std::ofstream out(garbled);
    out << "{ not json";
  }
  REQUIRE_THROWS_AS(load_checkpoint(garbled), ParseError);

  auto truncated = (dir.path / "truncated.json").string();
  {
    std::ofstream out(truncated);
    out << "{\"format_version\": 1}";
  }
  REQUIRE_THROWS_AS(load_checkpoint(truncated), ParseError);

  Checkpoint chk;
  chk.params = zero_params(Arch::linear, 2, 0);
  REQUIRE_THROWS_AS(save_checkpoint(chk, "/nonexistent_dir_zz/x.json"), IoError);
}
