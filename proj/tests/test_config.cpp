#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "prism/config.hpp"

using namespace prism;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("prism_config_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

struct EnvGuard {
  std::string name;
  explicit EnvGuard(std::string n) : name(std::move(n)) {}
  ~EnvGuard() { ::unsetenv(name.c_str()); }
  void set(const std::string& value) { ::setenv(name.c_str(), value.c_str(), 1); }
};

}  // namespace

TEST_CASE("defaults parse into a valid run configuration") {
  RunConfig cfg = parse_run_config(default_config());
  REQUIRE(cfg.data.mode == DataMode::vector);
  REQUIRE(cfg.data.d_g == 16);
  REQUIRE(cfg.data.rho_id == 0.95);
  REQUIRE(cfg.features.features ==
          std::vector<std::string>{"length", "sycophancy"});
  REQUIRE(cfg.judge.mode == JudgeMode::fake);
  REQUIRE(cfg.train.arch == Arch::linear);
  REQUIRE(cfg.train.mode == TrainMode::prism);
  REQUIRE(cfg.train.total_steps == 4000);
  REQUIRE(cfg.train.batch_size == 64);
  REQUIRE(cfg.train.lambda1.mid == 0.1);
  REQUIRE(cfg.n_permutations == 1000);
  REQUIRE(cfg.bench.m_values ==
          std::vector<std::size_t>{125, 250, 500, 1000, 2000});
  REQUIRE(cfg.effective == default_config());
}

TEST_CASE("file values overlay the defaults") {
  TempDir dir;
  auto path = (dir.path / "run.json").string();
  {
    std::ofstream out(path);
    out << R"({"data": {"rho_id": 0.8, "seed": 42},
               "train": {"mode": "bt", "lambda1": {"mid": 0.2}}})";
  }
  auto doc = effective_config(path, {}, false);
  RunConfig cfg = parse_run_config(doc);
  REQUIRE(cfg.data.rho_id == 0.8);
  REQUIRE(cfg.data.seed == 42);
  REQUIRE(cfg.data.rho_ood == 0.05);  // untouched default survives
  REQUIRE(cfg.train.mode == TrainMode::bt);
  REQUIRE(cfg.train.lambda1.mid == 0.2);
  REQUIRE(cfg.train.lambda1.start == 0.01);  // sibling keys survive too
}

TEST_CASE("unknown keys are rejected with their full path") {
  TempDir dir;
  auto path = (dir.path / "bad.json").string();
  {
    std::ofstream out(path);
    out << R"({"data": {"rho_idd": 0.8}})";
  }
  REQUIRE_THROWS_WITH(effective_config(path, {}, false),
                      Catch::Matchers::ContainsSubstring("data.rho_idd"));
  auto top = (dir.path / "top.json").string();
  {
    std::ofstream out(top);
    out << R"({"dataa": {}})";
  }
  REQUIRE_THROWS_WITH(effective_config(top, {}, false),
                      Catch::Matchers::ContainsSubstring("dataa"));
}

TEST_CASE("set overrides hit nested keys and win over files") {
  TempDir dir;
  auto path = (dir.path / "run.json").string();
  {
    std::ofstream out(path);
    out << R"({"train": {"total_steps": 100}})";
  }
  auto doc = effective_config(path, {"train.total_steps=200",
                                     "train.lambda2.end=0.07",
                                     "data.mode=text",
                                     "features.names=[\"length\"]"},
                              false);
  RunConfig cfg = parse_run_config(doc);
  REQUIRE(cfg.train.total_steps == 200);
  REQUIRE(cfg.train.lambda2.end == 0.07);
  REQUIRE(cfg.data.mode == DataMode::text);
  REQUIRE(cfg.features.features == std::vector<std::string>{"length"});
}

TEST_CASE("set overrides reject malformed or unknown targets") {
  auto doc = default_config();
  REQUIRE_THROWS_AS(apply_set_override(doc, "no_equals_sign"), ConfigError);
  REQUIRE_THROWS_AS(apply_set_override(doc, "=5"), ConfigError);
  REQUIRE_THROWS_WITH(apply_set_override(doc, "data.bogus=1"),
                      Catch::Matchers::ContainsSubstring("data.bogus"));
  REQUIRE_THROWS_AS(apply_set_override(doc, "train=5"), ConfigError);
  REQUIRE_THROWS_AS(apply_set_override(doc, "data.seed.deep=1"), ConfigError);
}

TEST_CASE("validation names the offending field") {
  auto doc = default_config();
  apply_set_override(doc, "data.rho_id=1.5");
  REQUIRE_THROWS_WITH(parse_run_config(doc),
                      Catch::Matchers::ContainsSubstring("rho_id"));

  doc = default_config();
  apply_set_override(doc, "train.batch_size=\"many\"");
  REQUIRE_THROWS_WITH(parse_run_config(doc),
                      Catch::Matchers::ContainsSubstring("train.batch_size"));

  doc = default_config();
  apply_set_override(doc, "data.mode=tabular");
  REQUIRE_THROWS_WITH(parse_run_config(doc),
                      Catch::Matchers::ContainsSubstring("data.mode"));

  doc = default_config();
  apply_set_override(doc, "model.arch=mlp9");
  REQUIRE_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = default_config();
  apply_set_override(doc, "eval.bench.s=2.5");
  REQUIRE_THROWS_AS(parse_run_config(doc), ConfigError);

  doc = default_config();
  apply_set_override(doc, "features.names=[]");
  REQUIRE_THROWS_AS(parse_run_config(doc), ConfigError);
}

TEST_CASE("environment supplies judge credentials only") {
  EnvGuard endpoint("PRISM_JUDGE_ENDPOINT");
  EnvGuard key("PRISM_JUDGE_KEY");
  endpoint.set("http://127.0.0.1:9/v1/chat/completions");
  key.set("secret-token");
  auto doc = effective_config(std::nullopt, {}, true);
  RunConfig cfg = parse_run_config(doc);
  REQUIRE(cfg.judge.endpoint == "http://127.0.0.1:9/v1/chat/completions");
  REQUIRE(cfg.judge.api_key == "secret-token");
  // credentials do not flip the mode by themselves
  REQUIRE(cfg.judge.mode == JudgeMode::fake);

  // explicit --set beats the environment
  auto doc2 = effective_config(std::nullopt, {"judge.api_key=cli-token"}, true);
  REQUIRE(parse_run_config(doc2).judge.api_key == "cli-token");
}

TEST_CASE("config files must exist and parse") {
  REQUIRE_THROWS_AS(load_config_file("/nonexistent_zz/config.json"), IoError);
  TempDir dir;
  auto path = (dir.path / "broken.json").string();
  {
    std::ofstream out(path);
    out << "{ nope";
  }
  REQUIRE_THROWS_AS(load_config_file(path), ParseError);
}

TEST_CASE("incomplete documents fail parsing loudly") {
  nlohmann::ordered_json doc{{"data", {{"mode", "vector"}}}};
  REQUIRE_THROWS_AS(parse_run_config(doc), ConfigError);
}
