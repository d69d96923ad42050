#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "naf/nn.hpp"
#include "naf/train.hpp"

namespace naf {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::string dir = "data/cifar-10-batches-bin";
  std::uint64_t dataset_seed = 0;
  int subset_size = -1;  // < 0: whole split
  int val_size = -1;     // < 0: follow subset_size
  int test_size = -1;    // < 0: follow subset_size
  bool cache_degraded = false;

  int train_count() const { return subset_size; }
  int val_count() const { return val_size >= 0 ? val_size : subset_size; }
  int test_count() const { return test_size >= 0 ? test_size : subset_size; }
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

// One run (train/eval) or one ablation sweep (variants).
struct RunConfig {
  VariantKind variant = VariantKind::Baseline;
  std::vector<VariantKind> variants{all_variants().begin(), all_variants().end()};
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::string output_dir = "runs/default";
  int grid_images = 8;

  // Model config with `variant` applied.
  ModelConfig model_for(VariantKind v) const {
    ModelConfig m = model;
    m.variant = v;
    return m;
  }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Unknown keys raise ConfigError naming the full key path; absent keys keep
// their defaults.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
void write_run_config(const std::filesystem::path& path, const RunConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& doc);

}  // namespace naf
