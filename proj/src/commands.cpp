#include "naf/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "naf/checkpoint.hpp"
#include "naf/gradcheck_suite.hpp"
#include "naf/image_io.hpp"
#include "naf/train.hpp"

namespace naf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string strf(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string hex64(std::uint64_t v) { return strf("%016llx", static_cast<unsigned long long>(v)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_cache(const fs::path& path, const PairedSet& set, std::ostream& log) {
  if (fs::exists(path)) {
    if (!verify_degraded_cache(path, set)) {
      throw DataFormatError("degraded cache " + path.string() +
                            " does not match the recomputed pairs; delete it to rebuild");
    }
    log << "verified degraded cache " << path.string() << "\n";
  } else {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    write_degraded_cache(path, set);
    log << "wrote degraded cache " << path.string() << "\n";
  }
}

RunConfig config_from_checkpoint(const CheckpointMeta& meta, const ModelConfig& model) {
  RunConfig cfg;
  if (!meta.run_config.empty()) cfg = parse_run_config(meta.run_config);
  cfg.variant = model.variant;
  return cfg;
}

// Restorations of the first `count` test images, clamped to [0, 1].
std::vector<float> restore_first(const ModelState& model, const PairedSet& test, int count) {
  std::vector<int> pos;
  for (int i = 0; i < count && i < static_cast<int>(test.size()); ++i) pos.push_back(i);
  if (pos.empty()) return {};
  Tape tape(false);
  const Batch b = gather_batch(test, pos);
  const Tensor y = clamp(unet_forward(tape, b.degraded, model), 0.0f, 1.0f);
  return std::vector<float>(y.data().begin(), y.data().end());
}

}  // namespace

RunConfig resolve_config(const std::optional<fs::path>& config_path, const CliOverrides& cli) {
  RunConfig cfg = config_path ? load_run_config(*config_path) : RunConfig{};
  if (cli.seed) cfg.train.seed = *cli.seed;
  if (cli.deterministic) cfg.train.deterministic = true;
  if (cli.out) cfg.output_dir = *cli.out;
  if (cli.subset) {
    if (*cli.subset < 1) throw ConfigError("--subset must be positive");
    cfg.data.subset_size = *cli.subset;
  }
  return cfg;
}

PreparedData prepare_data(const DataConfig& cfg, DataNeeds needs, const fs::path& cache_dir,
                          std::ostream& log) {
  const Cifar10 data = load_cifar10(cfg.dir);
  const DatasetSplit split = make_split(data, cfg.train_count(), cfg.val_count(),
                                        cfg.test_count());
  PreparedData out;
  if (needs.train_val) {
    out.train = build_pairs(data.train_pool, split.train, Split::Train, cfg.dataset_seed);
    out.val = build_pairs(data.train_pool, split.val, Split::Val, cfg.dataset_seed);
    if (out.train.size() == 0 || out.val.size() == 0) {
      throw DataFormatError("training needs non-empty train and val splits");
    }
  }
  if (needs.test) {
    out.test = build_pairs(data.test, split.test, Split::Test, cfg.dataset_seed);
  }
  log << "data: " << out.train.size() << " train, " << out.val.size() << " val, "
      << out.test.size() << " test images from " << cfg.dir << "\n";
  if (cfg.cache_degraded) {
    const std::string tag = "_seed" + std::to_string(cfg.dataset_seed) + ".bin";
    if (needs.train_val) {
      check_cache(cache_dir / ("train" + tag), out.train, log);
      check_cache(cache_dir / ("val" + tag), out.val, log);
    }
    if (needs.test) check_cache(cache_dir / ("test" + tag), out.test, log);
  }
  return out;
}

TrainOutcome train_variant(const RunConfig& cfg_in, VariantKind variant, const PreparedData& data,
                           const fs::path& dir, std::ostream& log) {
  RunConfig cfg = cfg_in;
  cfg.variant = variant;
  cfg.model.variant = variant;
  cfg.output_dir = dir.string();
  fs::create_directories(dir);
  write_run_config(dir / "config.json", cfg);

  ModelState model = make_model<float>(cfg.model_for(variant), cfg.train.seed);
  AdamState opt = AdamState::for_model(model, cfg.train);

  TrainOutcome outcome;
  outcome.params = param_count(model);
  outcome.degraded_val_psnr = degraded_metrics(data.val).mean_psnr;
  outcome.checkpoint = dir / "best.ckpt";

  std::ofstream csv(dir / "train_log.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + (dir / "train_log.csv").string());
  csv << "epoch,lr,train_loss,val_psnr\n";

  const auto t0 = std::chrono::steady_clock::now();
  FitHooks hooks;
  hooks.on_improve = [&](const EpochRecord& rec, const EarlyStopState& es) {
    CheckpointMeta meta{rec.epoch, es.best_val_psnr, es.best_epoch, to_json(cfg)};
    save_checkpoint(outcome.checkpoint, model, opt, meta);
  };
  hooks.on_epoch = [&](const EpochRecord& rec) {
    csv << rec.epoch << ',' << strf("%.9g", rec.lr) << ',' << strf("%.9g", rec.train_loss) << ','
        << strf("%.6f", rec.val_psnr) << '\n';
    csv.flush();
    log << strf("[%s] epoch %d  lr %.3g  train loss %.6f  val PSNR %.3f dB  (%.0fs)\n",
                std::string(variant_id(variant)).c_str(), rec.epoch, rec.lr, rec.train_loss,
                rec.val_psnr, seconds_since(t0));
  };
  log << strf("[%s] %zu parameters, degraded val PSNR %.4f dB\n",
              std::string(variant_id(variant)).c_str(), outcome.params,
              outcome.degraded_val_psnr);

  const FitResult fit_result = fit(model, opt, data.train, data.val, cfg.train, hooks);
  outcome.initial_val_psnr = fit_result.initial_val_psnr;
  outcome.best_val_psnr = fit_result.early_stop.best_val_psnr;
  outcome.best_epoch = fit_result.early_stop.best_epoch;
  outcome.epochs_run = fit_result.epochs_run;
  outcome.stopped_early = fit_result.stopped_early;
  outcome.first_batch_checksum = fit_result.first_batch_checksum;

  json summary{{"variant", std::string(variant_id(variant))},
               {"params", outcome.params},
               {"epochs_run", outcome.epochs_run},
               {"stopped_early", outcome.stopped_early},
               {"best_epoch", outcome.best_epoch},
               {"best_val_psnr", outcome.best_val_psnr},
               {"initial_val_psnr", outcome.initial_val_psnr},
               {"degraded_val_psnr", outcome.degraded_val_psnr},
               {"first_batch_checksum", hex64(outcome.first_batch_checksum)},
               {"checkpoint", outcome.checkpoint.filename().string()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return outcome;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.output_dir;
  PreparedData data;
  try {
    data = prepare_data(cfg.data, DataNeeds{true, false}, dir / "cache", out);
  } catch (const DataFormatError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  try {
    const TrainOutcome r = train_variant(cfg, cfg.variant, data, dir, out);
    out << strf("done: best val PSNR %.4f dB at epoch %d (%d epochs run); checkpoint %s\n",
                r.best_val_psnr, r.best_epoch, r.epochs_run, r.checkpoint.string().c_str());
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

int cmd_eval(const fs::path& checkpoint, std::optional<int> test_images,
             const std::optional<fs::path>& out_dir, std::ostream& out, std::ostream& err) {
  LoadedCheckpoint ck;
  try {
    ck = load_checkpoint(checkpoint);
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
  RunConfig cfg = config_from_checkpoint(ck.meta, ck.model.config());
  if (test_images) {
    if (*test_images < 1) {
      err << "error: --subset must be positive\n";
      return 2;
    }
    cfg.data.test_size = *test_images;
  }
  // The degraded-input cache belongs to training runs; eval recomputes.
  cfg.data.cache_degraded = false;
  PreparedData data;
  try {
    data = prepare_data(cfg.data, DataNeeds{false, true}, {}, out);
  } catch (const DataFormatError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  const MetricsReport r = evaluate_testset(ck.model, data.test);
  const std::string variant(variant_id(ck.model.config().variant));
  out << strf("variant %s  test images %zu  PSNR %.4f dB  SSIM %.6f  params %zu\n",
              variant.c_str(), r.n_images, r.mean_psnr, r.mean_ssim, param_count(ck.model));

  const fs::path dir = out_dir ? *out_dir : checkpoint.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  std::ostringstream csv;
  csv << "variant,checkpoint,epoch,n_images,psnr,ssim,params\n"
      << variant << ',' << checkpoint.filename().string() << ',' << ck.meta.epoch << ','
      << r.n_images << ',' << strf("%.6f", r.mean_psnr) << ',' << strf("%.6f", r.mean_ssim)
      << ',' << param_count(ck.model) << '\n';
  write_text(dir / "eval_results.csv", csv.str());
  return 0;
}

std::string format_table_text(const AblationTable& table) {
  double best_psnr = -1e300, best_ssim = -1e300;
  for (const auto& r : table.rows) {
    if (!r.ok) continue;
    best_psnr = std::max(best_psnr, std::stod(strf("%.2f", r.psnr)));
    best_ssim = std::max(best_ssim, std::stod(strf("%.4f", r.ssim)));
  }
  std::ostringstream os;
  os << strf("%-40s %10s %9s %10s %7s %10s\n", "Model", "PSNR (dB)", "SSIM", "Params",
             "Epochs", "Best epoch");
  os << std::string(91, '-') << "\n";
  for (const auto& r : table.rows) {
    const std::string label(variant_label(r.variant));
    if (!r.ok) {
      os << strf("%-40s %10s %9s %10zu %7s %10s\n", label.c_str(), "failed", "failed", r.params,
                 "-", "-");
      continue;
    }
    const std::string p = strf("%.2f", r.psnr), s = strf("%.4f", r.ssim);
    os << strf("%-40s %10s %9s %10zu %7d %10d\n", label.c_str(),
               (p + (std::stod(p) == best_psnr ? "*" : " ")).c_str(),
               (s + (std::stod(s) == best_ssim ? "*" : " ")).c_str(), r.params, r.epochs_run,
               r.best_epoch);
  }
  os << "\n* best value in column.\n";
  os << strf("Degraded input (no restoration): PSNR %.2f dB, SSIM %.4f over %zu test images.\n",
             table.degraded_psnr, table.degraded_ssim, table.test_images);
  os << "LPIPS: out of scope.\n";
  for (const auto& r : table.rows) {
    if (!r.ok) os << variant_id(r.variant) << " failed: " << r.error << "\n";
  }
  return os.str();
}

std::string format_table_csv(const AblationTable& table) {
  std::ostringstream os;
  os << "variant,label,status,psnr_db,ssim,params,epochs_run,best_epoch\n";
  for (const auto& r : table.rows) {
    os << variant_id(r.variant) << ",\"" << variant_label(r.variant) << "\","
       << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      os << strf("%.2f", r.psnr) << ',' << strf("%.4f", r.ssim) << ',' << r.params << ','
         << r.epochs_run << ',' << r.best_epoch << '\n';
    } else {
      os << ",," << r.params << ",,\n";
    }
  }
  return os.str();
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path root = cfg.output_dir;
  fs::create_directories(root);
  write_run_config(root / "config.json", cfg);
  PreparedData data;
  try {
    data = prepare_data(cfg.data, DataNeeds{true, true}, root / "cache", out);
  } catch (const DataFormatError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }

  AblationTable table;
  const MetricsReport degraded = degraded_metrics(data.test);
  table.degraded_psnr = degraded.mean_psnr;
  table.degraded_ssim = degraded.mean_ssim;
  table.test_images = degraded.n_images;

  // Shared-name parameters must start identical in every variant.
  const ModelState reference = make_model<float>(cfg.model_for(VariantKind::Baseline),
                                                 cfg.train.seed);
  const int grid_n = std::min<int>(cfg.grid_images, static_cast<int>(data.test.size()));
  std::vector<std::pair<VariantKind, std::vector<float>>> restored;

  for (VariantKind v : cfg.variants) {
    AblationRow row;
    row.variant = v;
    const fs::path dir = root / std::string(variant_id(v));
    try {
      const ModelState init = make_model<float>(cfg.model_for(v), cfg.train.seed);
      row.params = param_count(init);
      for (const auto& [name, t] : init.params()) {
        if (!reference.contains(name) || !(reference.get(name).shape() == t.shape())) continue;
        // A bias shares its init bound with its weight, so both shapes must match.
        if (name.ends_with(".bias")) {
          const std::string w = name.substr(0, name.size() - 5) + ".weight";
          if (!reference.contains(w) || !init.contains(w) ||
              !(reference.get(w).shape() == init.get(w).shape())) {
            continue;
          }
        }
        const Tensor& ref = reference.get(name);
        if (!std::equal(ref.data().begin(), ref.data().end(), t.data().begin())) {
          throw std::logic_error("initial value of " + name + " differs from the baseline");
        }
      }
      const TrainOutcome trained = train_variant(cfg, v, data, dir, out);
      row.epochs_run = trained.epochs_run;
      row.best_epoch = trained.best_epoch;
      row.first_batch_checksum = trained.first_batch_checksum;
      const LoadedCheckpoint best = load_checkpoint(trained.checkpoint);
      const MetricsReport r = evaluate_testset(best.model, data.test);
      row.psnr = r.mean_psnr;
      row.ssim = r.mean_ssim;
      row.ok = true;
      std::ostringstream csv;
      csv << "variant,checkpoint,epoch,n_images,psnr,ssim,params\n"
          << variant_id(v) << ",best.ckpt," << best.meta.epoch << ',' << r.n_images << ','
          << strf("%.6f", r.mean_psnr) << ',' << strf("%.6f", r.mean_ssim) << ',' << row.params
          << '\n';
      write_text(dir / "eval_results.csv", csv.str());
      if (grid_n > 0) restored.emplace_back(v, restore_first(best.model, data.test, grid_n));
      out << strf("[%s] test PSNR %.4f dB  SSIM %.6f\n", std::string(variant_id(v)).c_str(),
                  row.psnr, row.ssim);
    } catch (const std::exception& e) {
      row.error = e.what();
      err << "variant " << variant_id(v) << " failed: " << e.what() << "\n";
    }
    table.rows.push_back(row);
  }

  bool fair = true;
  std::optional<std::uint64_t> checksum;
  for (const auto& r : table.rows) {
    if (!r.ok) continue;
    if (checksum && *checksum != r.first_batch_checksum) fair = false;
    checksum = r.first_batch_checksum;
  }

  std::string text = format_table_text(table);
  if (checksum) {
    text += "First-batch degraded checksum " + hex64(*checksum) +
            (fair ? " identical across variants.\n" : " DIFFERS across variants.\n");
  }
  write_text(root / "table.txt", text);
  write_text(root / "table.csv", format_table_csv(table));
  out << "\n" << text;

  if (grid_n > 0) {
    // One row per test image: clean | degraded | each variant's restoration.
    std::vector<std::vector<std::span<const float>>> rows;
    for (int i = 0; i < grid_n; ++i) {
      std::vector<std::span<const float>> row{data.test.clean_image(i),
                                              data.test.degraded_image(i)};
      for (const auto& [v, imgs] : restored) {
        row.push_back(std::span<const float>(imgs).subspan(i * kImageValues, kImageValues));
      }
      rows.push_back(std::move(row));
    }
    const RgbImage grid = tile_images(rows, kImageSide, kImageSide);
    write_image(grid.chw, grid.height, grid.width, root / "grid.ppm");
    std::string legend = "grid.ppm columns: clean, degraded";
    for (const auto& [v, imgs] : restored) legend += ", " + std::string(variant_id(v));
    write_text(root / "grid_columns.txt", legend + "\n");
  }

  if (!fair) {
    err << "error: variants saw different first batches\n";
    return 1;
  }
  const bool all_ok =
      std::all_of(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.ok; });
  return all_ok ? 0 : 1;
}

int cmd_restore(const fs::path& checkpoint, const fs::path& input, const fs::path& output,
                std::ostream& out, std::ostream& err) {
  LoadedCheckpoint ck;
  RgbImage img;
  try {
    ck = load_checkpoint(checkpoint);
    img = read_image(input);
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  if (img.height != kImageSide || img.width != kImageSide) {
    err << "error: " << input.string() << " is " << img.width << "x" << img.height
        << ", expected " << kImageSide << "x" << kImageSide << "\n";
    return 3;
  }
  Tape tape(false);
  const Tensor x(Shape{1, kImageChannels, kImageSide, kImageSide}, img.chw);
  const Tensor y = clamp(unet_forward(tape, x, ck.model), 0.0f, 1.0f);
  write_image(y.data(), output);

  fs::path strip = output;
  strip.replace_filename(output.stem().string() + "_strip.ppm");
  const RgbImage side = tile_images({{x.data(), y.data()}}, kImageSide, kImageSide);
  write_image(side.chw, side.height, side.width, strip);
  out << "wrote " << output.string() << " and " << strip.string() << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& fault_op, std::ostream& out, std::ostream& err) {
  GradCheckReport report;
  try {
    report = run_gradcheck_suite(fault_op, 1.5, &out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (report.passed()) {
    out << "gradient check passed: " << report.entries.size() << " cases, tolerance "
        << kGradCheckTolerance << "\n";
    return 0;
  }
  err << "gradient check FAILED for:";
  for (const auto& name : report.failed_ops()) err << " " << name;
  err << "\n";
  return 1;
}

int cmd_synth_data(const fs::path& dir, std::uint64_t seed, std::ostream& out) {
  write_synthetic_cifar10(dir, seed);
  out << "wrote synthetic CIFAR-10 layout (5 x 10000 train, 10000 test records) to "
      << dir.string() << "\n";
  return 0;
}

}  // namespace naf
