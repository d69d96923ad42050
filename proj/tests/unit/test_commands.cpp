#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "naf/checkpoint.hpp"
#include "naf/commands.hpp"
#include "naf/image_io.hpp"

using namespace naf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig small_run(const fs::path& out) {
  RunConfig cfg;
  cfg.model.base_width = 8;
  cfg.model.enc_blocks = {1, 1};
  cfg.model.mid_blocks = 1;
  cfg.model.dec_blocks = {1, 1};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.seed = 11;
  cfg.data.dir = fixture::data_dir().string();
  cfg.data.subset_size = 16;
  cfg.data.val_size = 8;
  cfg.data.test_size = 8;
  cfg.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("overrides take precedence over the config file") {
    CliOverrides o;
    o.seed = 9;
    o.subset = 50;
    o.out = "x";
    o.deterministic = true;
    const RunConfig cfg = resolve_config(std::nullopt, o);
    CHECK(cfg.train.seed == 9);
    CHECK(cfg.data.subset_size == 50);
    CHECK(cfg.output_dir == "x");
    o.subset = 0;
    CHECK_THROWS_AS(resolve_config(std::nullopt, o), ConfigError);
  }

  TEST_CASE("train, config echo, eval and restore") {
    const fs::path root = fixture::temp_dir("cmd_train");
    std::ostringstream out, err;
    const RunConfig cfg = small_run(root / "a");
    REQUIRE(cmd_train(cfg, out, err) == 0);
    const std::string log = slurp(root / "a" / "train_log.csv");
    CHECK(count_lines(log) == 3);
    CHECK(log.rfind("epoch,lr,train_loss,val_psnr\n", 0) == 0);
    CHECK(fs::exists(root / "a" / "best.ckpt"));
    const auto summary = nlohmann::json::parse(slurp(root / "a" / "summary.json"));
    CHECK(summary.at("epochs_run") == 2);

    // Same config again: identical log.
    REQUIRE(cmd_train(small_run(root / "b"), out, err) == 0);
    CHECK(slurp(root / "b" / "train_log.csv") == log);

    // The echoed config reproduces the run.
    RunConfig echoed = load_run_config(root / "a" / "config.json");
    echoed.output_dir = (root / "c").string();
    REQUIRE(cmd_train(echoed, out, err) == 0);
    CHECK(slurp(root / "c" / "train_log.csv") == log);

    // Eval twice gives the same line; --subset sets the image count.
    REQUIRE(cmd_eval(root / "a" / "best.ckpt", std::nullopt, root / "e1", out, err) == 0);
    REQUIRE(cmd_eval(root / "a" / "best.ckpt", std::nullopt, root / "e2", out, err) == 0);
    const std::string e1 = slurp(root / "e1" / "eval_results.csv");
    CHECK(e1 == slurp(root / "e2" / "eval_results.csv"));
    CHECK(e1.find("baseline,best.ckpt,") != std::string::npos);
    REQUIRE(cmd_eval(root / "a" / "best.ckpt", 5, root / "e3", out, err) == 0);
    CHECK(slurp(root / "e3" / "eval_results.csv").find(",5,") != std::string::npos);
    CHECK(cmd_eval(root / "a" / "best.ckpt", 0, root / "e4", out, err) == 2);
    CHECK(cmd_eval(root / "missing.ckpt", std::nullopt, root / "e4", out, err) == 5);

    // Restore writes the image and a side-by-side strip.
    std::vector<float> img(kImageValues, 0.4f);
    write_image(img, root / "in.ppm");
    REQUIRE(cmd_restore(root / "a" / "best.ckpt", root / "in.ppm", root / "out.ppm", out, err) == 0);
    CHECK(read_image(root / "out.ppm").width == 32);
    const RgbImage strip = read_image(root / "out_strip.ppm");
    CHECK(strip.width == 66);
    CHECK(strip.height == 32);
    fs::remove_all(root);
  }

  TEST_CASE("an untrained checkpoint restores a clean image unchanged") {
    const fs::path root = fixture::temp_dir("cmd_restore");
    RunConfig cfg = small_run(root);
    ModelState model = make_model<float>(cfg.model, 0);
    save_checkpoint(root / "id.ckpt", model, AdamState::for_model(model), CheckpointMeta{0, 0.0, 0, to_json(cfg)});
    const Cifar10 data = load_cifar10(fixture::data_dir());
    const Image clean = data.test[0].clean();
    write_image(clean, root / "clean.ppm");
    std::ostringstream out, err;
    REQUIRE(cmd_restore(root / "id.ckpt", root / "clean.ppm", root / "r.ppm", out, err) == 0);
    CHECK(read_file(root / "r.ppm") == read_file(root / "clean.ppm"));

    write_image(std::vector<float>(3 * 16 * 16, 0.5f), 16, 16, root / "small.ppm");
    CHECK(cmd_restore(root / "id.ckpt", root / "small.ppm", root / "r2.ppm", out, err) == 3);
    CHECK(err.str().find("is 16x16, expected 32x32") != std::string::npos);
    fs::remove_all(root);
  }

  TEST_CASE("missing data is exit code 3 with a clear message") {
    const fs::path root = fixture::temp_dir("cmd_nodata");
    RunConfig cfg = small_run(root / "run");
    cfg.data.dir = (root / "nothing").string();
    std::ostringstream out, err;
    CHECK(cmd_train(cfg, out, err) == 3);
    CHECK(err.str().find("data_batch_1.bin") != std::string::npos);
    fs::remove_all(root);
  }

  TEST_CASE("a small ablation writes the table, grid and per-variant runs") {
    const fs::path root = fixture::temp_dir("cmd_ablate");
    RunConfig cfg = small_run(root);
    cfg.train.epochs = 1;
    cfg.variants = {VariantKind::Baseline, VariantKind::A4_NoAttention};
    cfg.grid_images = 2;
    cfg.data.cache_degraded = true;
    std::ostringstream out, err;
    REQUIRE(cmd_ablate(cfg, out, err) == 0);
    const std::string table = slurp(root / "table.txt");
    CHECK(table.find("Baseline") != std::string::npos);
    CHECK(table.find("A4: Remove Attention") != std::string::npos);
    CHECK(table.find("LPIPS: out of scope.") != std::string::npos);
    CHECK(count_lines(slurp(root / "table.csv")) == 3);
    CHECK(fs::exists(root / "baseline" / "best.ckpt"));
    CHECK(fs::exists(root / "a4_no_attention" / "eval_results.csv"));
    const RgbImage grid = read_image(root / "grid.ppm");
    CHECK(grid.width == 4 * 32 + 3 * 2);
    CHECK(grid.height == 2 * 32 + 2);
    CHECK(fs::exists(root / "cache" / "train_seed0.bin"));
    CHECK(table.find("identical across variants") != std::string::npos);

    // Every row is recomputable from its saved checkpoint.
    for (const char* v : {"baseline", "a4_no_attention"}) {
      REQUIRE(cmd_eval(root / v / "best.ckpt", std::nullopt, root / "recheck", out, err) == 0);
      CHECK(slurp(root / "recheck" / "eval_results.csv") == slurp(root / v / "eval_results.csv"));
    }
    // Rerun with the cache present verifies it instead of rewriting.
    std::ostringstream out2;
    REQUIRE(cmd_ablate(cfg, out2, err) == 0);
    CHECK(slurp(root / "table.csv").find("baseline") != std::string::npos);
    fs::remove_all(root);
  }

  TEST_CASE("table marks the best row and reports failures") {
    AblationTable t;
    t.degraded_psnr = 21.5;
    t.degraded_ssim = 0.5;
    t.test_images = 10;
    AblationRow a;
    a.ok = true;
    a.psnr = 25.004;
    a.ssim = 0.81;
    a.params = 100;
    AblationRow b;
    b.variant = VariantKind::A1_Gelu;
    b.ok = true;
    b.psnr = 24.0;
    b.ssim = 0.83;
    AblationRow c;
    c.variant = VariantKind::A2_Eca;
    c.error = "diverged";
    t.rows = {a, b, c};
    const std::string text = format_table_text(t);
    CHECK(text.find("25.00*") != std::string::npos);
    CHECK(text.find("0.8300*") != std::string::npos);
    CHECK(text.find("24.00 ") != std::string::npos);
    CHECK(text.find("a2_eca failed: diverged") != std::string::npos);
    const std::string csv = format_table_csv(t);
    CHECK(csv.find("a2_eca,\"A2: Replace SCA -> ECA\",failed") != std::string::npos);
    CHECK(csv.find("baseline,\"Baseline\",ok,25.00,0.8100,100") != std::string::npos);
  }

  TEST_CASE("gradcheck command exit codes") {
    std::ostringstream out, err;
    CHECK(cmd_gradcheck("no_such_op", out, err) == 2);
    CHECK(cmd_gradcheck("sigmoid", out, err) == 1);
    CHECK(err.str().find("sigmoid") != std::string::npos);
  }
}
