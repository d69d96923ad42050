#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "naf/data.hpp"
#include "naf/nn.hpp"

namespace naf {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr_init = 1e-3;
  double lr_final = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int patience = 10;
  double improve_eps = 1e-4;  // dB
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// First and second moments per parameter, in model parameter order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  static AdamState for_model(const ModelState& model, const TrainConfig& cfg = {});
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t batch)
      : std::runtime_error(what), batch_index(batch) {}
  std::size_t batch_index;
};

// Mean of squared differences as a (1, 1, 1, 1) tensor.
template <typename T>
BasicTensor<T> mse_loss(BasicTape<T>& tape, const BasicTensor<T>& pred,
                        const BasicTensor<T>& target);

// Bias-corrected Adam update of every parameter; increments opt.step.
// Gradients are left in place.
void adam_step(ModelState& model, AdamState& opt, double lr);

// Cosine decay from lr_init at epoch 0 to lr_final at the last epoch.
double cosine_lr(int epoch, const TrainConfig& cfg);

// For each batch: zero grads, forward, MSE, backward, Adam. Returns the mean
// batch loss. Throws TrainingDiverged on a non-finite loss.
double train_epoch(ModelState& model, AdamState& opt, const PairedSet& set,
                   std::span<const std::vector<int>> batches, double lr);

// Mean per-image PSNR of the clamped restorations over `val`.
double validate(const ModelState& model, const PairedSet& val, int batch_size = 100);

struct EarlyStopState {
  int patience = 10;
  double improve_eps = 1e-4;
  double best_val_psnr = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_since_improve = 0;
};

// Records one validation result. An epoch improves when val_psnr exceeds the
// best by more than improve_eps. Returns true once patience non-improving
// epochs have accumulated.
bool early_stop_update(EarlyStopState& state, int epoch, double val_psnr);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_psnr = 0.0;
};

struct FitHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Called after an improving epoch, before on_epoch.
  std::function<void(const EpochRecord&, const EarlyStopState&)> on_improve;
};

struct FitResult {
  double initial_val_psnr = 0.0;
  std::vector<EpochRecord> log;
  EarlyStopState early_stop;
  int epochs_run = 0;
  bool stopped_early = false;
  std::uint64_t first_batch_checksum = 0;
};

// Seed of the batch order for `epoch`.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

// Full loop: per epoch shuffle, train, validate, early-stop bookkeeping.
FitResult fit(ModelState& model, AdamState& opt, const PairedSet& train,
              const PairedSet& val, const TrainConfig& cfg, const FitHooks& hooks = {});

}  // namespace naf
