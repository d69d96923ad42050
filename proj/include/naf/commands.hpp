#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "naf/data.hpp"
#include "naf/metrics.hpp"
#include "naf/run_config.hpp"

namespace naf {

// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;  // forces deterministic mode on
  std::optional<std::string> out;
  std::optional<int> subset;
};

// Config file (or defaults when absent) with overrides applied.
RunConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                         const CliOverrides& cli);

struct PreparedData {
  PairedSet train;
  PairedSet val;
  PairedSet test;
};

struct DataNeeds {
  bool train_val = true;
  bool test = true;
};

// Loads CIFAR-10 from cfg.dir and builds the degraded pairs of each requested
// split. With cache_degraded set, each split's quantized cache under
// cache_dir is verified against the recomputation, or written when absent.
PreparedData prepare_data(const DataConfig& cfg, DataNeeds needs,
                          const std::filesystem::path& cache_dir, std::ostream& log);

struct TrainOutcome {
  double initial_val_psnr = 0.0;
  double degraded_val_psnr = 0.0;
  double best_val_psnr = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  bool stopped_early = false;
  std::uint64_t first_batch_checksum = 0;
  std::size_t params = 0;
  std::filesystem::path checkpoint;
};

// Trains one variant into `dir`: config.json, train_log.csv, best.ckpt and
// summary.json.
TrainOutcome train_variant(const RunConfig& cfg, VariantKind variant, const PreparedData& data,
                           const std::filesystem::path& dir, std::ostream& log);

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Evaluates a checkpoint on the test split described by its stored config;
// `test_images` replaces the stored test size when given. Writes
// eval_results.csv into out_dir (default: the checkpoint's directory).
int cmd_eval(const std::filesystem::path& checkpoint, std::optional<int> test_images,
             const std::optional<std::filesystem::path>& out_dir, std::ostream& out,
             std::ostream& err);

struct AblationRow {
  VariantKind variant = VariantKind::Baseline;
  bool ok = false;
  std::string error;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t params = 0;
  int epochs_run = 0;
  int best_epoch = -1;
  std::uint64_t first_batch_checksum = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  double degraded_psnr = 0.0;
  double degraded_ssim = 0.0;
  std::size_t test_images = 0;
};

std::string format_table_text(const AblationTable& table);
std::string format_table_csv(const AblationTable& table);

int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Restores one 32x32 PPM and writes the result plus `<output stem>_strip.ppm`
// (input | restored).
int cmd_restore(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                const std::filesystem::path& output, std::ostream& out, std::ostream& err);

int cmd_gradcheck(const std::string& fault_op, std::ostream& out, std::ostream& err);

int cmd_synth_data(const std::filesystem::path& dir, std::uint64_t seed, std::ostream& out);

}  // namespace naf
