#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "naf/run_config.hpp"

using namespace naf;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("absent keys keep defaults") {
    const RunConfig cfg = parse_run_config(json::object());
    CHECK(cfg == RunConfig{});
    CHECK(cfg.train.epochs == 50);
    CHECK(cfg.train.batch_size == 16);
    CHECK(cfg.variants.size() == 5);
  }

  TEST_CASE("unknown keys are reported with their full path") {
    CHECK_THROWS_WITH_AS(parse_run_config(json{{"train", {{"lr", 0.1}}}}),
                         doctest::Contains("train.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config(json{{"modle", json::object()}}),
                         doctest::Contains("modle"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config(json{{"data", {{"subset", 5}}}}),
                         doctest::Contains("data.subset"), ConfigError);
  }

  TEST_CASE("wrong types and invalid values are config errors") {
    CHECK_THROWS_AS(parse_run_config(json{{"train", {{"epochs", "ten"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"train", {{"epochs", 0}}}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"variant", "a9"}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"variants", json::array()}}), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json{{"model", {{"gn_groups", 5}}}}), ConfigError);
  }

  TEST_CASE("to_json round-trips") {
    RunConfig cfg;
    cfg.variant = VariantKind::A3_GroupNorm;
    cfg.model.variant = cfg.variant;
    cfg.variants = {VariantKind::Baseline, VariantKind::A4_NoAttention};
    cfg.model.base_width = 16;
    cfg.model.enc_blocks = {1, 2, 3};
    cfg.model.dec_blocks = {3, 2, 1};
    cfg.train.epochs = 7;
    cfg.train.seed = 123456789012345ULL;
    cfg.train.lr_init = 2e-3;
    cfg.data.subset_size = 100;
    cfg.data.test_size = 40;
    cfg.data.cache_degraded = true;
    cfg.output_dir = "runs/x";
    CHECK(parse_run_config(to_json(cfg)) == cfg);
    CHECK(parse_run_config(to_json(RunConfig{})) == RunConfig{});
  }

  TEST_CASE("config files may carry comments") {
    const auto dir = fixture::temp_dir("cfg");
    {
      std::ofstream f(dir / "c.json");
      f << "{\n  // short run\n  \"train\": {\"epochs\": 3},\n  \"data\": {\"subset_size\": 10}\n}\n";
    }
    const RunConfig cfg = load_run_config(dir / "c.json");
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.data.val_count() == 10);
    CHECK(cfg.data.test_count() == 10);
    write_run_config(dir / "echo.json", cfg);
    CHECK(load_run_config(dir / "echo.json") == cfg);
    CHECK_THROWS_AS(load_run_config(dir / "none.json"), ConfigError);
    {
      std::ofstream f(dir / "bad.json");
      f << "{ \"train\": ";
    }
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("model config round-trips on its own") {
    ModelConfig m;
    m.variant = VariantKind::A2_Eca;
    m.eca_kernel = 5;
    CHECK(model_config_from_json(to_json(m)) == m);
    CHECK_THROWS_AS(model_config_from_json(json{{"depth", 3}}), ConfigError);
  }
}
