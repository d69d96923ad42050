#include "naf/train.hpp"

#include <cmath>
#include <numbers>

#include "naf/metrics.hpp"
#include "naf/rng.hpp"

namespace naf {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(lr_final > 0.0 && lr_final <= lr_init)) {
    throw std::invalid_argument("train learning rates must satisfy 0 < lr_final <= lr_init");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("train.eps must be positive");
  if (patience < 1) throw std::invalid_argument("train.patience must be >= 1");
  if (!(improve_eps >= 0.0)) throw std::invalid_argument("train.improve_eps must be >= 0");
}

AdamState AdamState::for_model(const ModelState& model, const TrainConfig& cfg) {
  AdamState s;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.eps = cfg.eps;
  for (const auto& [name, t] : model.params()) {
    s.m.emplace_back(t.numel(), 0.0f);
    s.v.emplace_back(t.numel(), 0.0f);
  }
  return s;
}

template <typename T>
BasicTensor<T> mse_loss(BasicTape<T>& tape, const BasicTensor<T>& pred,
                        const BasicTensor<T>& target) {
  if (!(pred.shape() == target.shape())) {
    throw ShapeError("mse_loss: shape mismatch " + pred.shape().str() + " vs " +
                     target.shape().str());
  }
  auto pv = pred.data();
  auto tv = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = static_cast<double>(pv[i]) - tv[i];
    acc += d * d;
  }
  const double count = static_cast<double>(pv.size());
  const bool track = tape.tracks({&pred, &target});
  BasicTensor<T> y(Shape{1, 1, 1, 1}, {static_cast<T>(acc / count)}, track);
  if (track) {
    tape.record("mse_loss", {pred, target}, {y}, [pred, target, y, count]() mutable {
      const double g = y.grad()[0];
      auto pv = pred.data();
      auto tv = target.data();
      std::vector<double> d(pv.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = 2.0 * g * (static_cast<double>(pv[i]) - tv[i]) / count;
      }
      if (pred.requires_grad()) accumulate_grad(pred, std::span<const double>(d));
      if (target.requires_grad()) {
        for (double& v : d) v = -v;
        accumulate_grad(target, std::span<const double>(d));
      }
    });
  }
  return y;
}

template BasicTensor<float> mse_loss(BasicTape<float>&, const BasicTensor<float>&,
                                     const BasicTensor<float>&);
template BasicTensor<double> mse_loss(BasicTape<double>&, const BasicTensor<double>&,
                                      const BasicTensor<double>&);

void adam_step(ModelState& model, AdamState& opt, double lr) {
  auto& params = model.params();
  if (opt.m.size() != params.size() || opt.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state has " +
                                std::to_string(opt.m.size()) + " slots for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) throw std::invalid_argument("adam_step: missing gradient for " + name);
  }
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p].second;
    auto theta = t.mutable_data();
    auto g = t.grad();
    auto& m = opt.m[p];
    auto& v = opt.v[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
      const double vi = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      theta[i] = static_cast<float>(theta[i] - lr * m_hat / (std::sqrt(v_hat) + opt.eps));
    }
  }
}

double cosine_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw std::out_of_range("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(cfg.epochs) + ")");
  }
  if (cfg.epochs == 1) return cfg.lr_init;
  const double t = static_cast<double>(epoch) / (cfg.epochs - 1);
  return cfg.lr_final +
         0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

double train_epoch(ModelState& model, AdamState& opt, const PairedSet& set,
                   std::span<const std::vector<int>> batches, double lr) {
  double total = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch batch = gather_batch(set, batches[b]);
    model.zero_grads();
    Tape tape;
    const Tensor pred = unet_forward(tape, batch.degraded, model);
    const Tensor loss = mse_loss(tape, pred, batch.clean);
    const double value = loss[0];
    if (!std::isfinite(value)) {
      throw TrainingDiverged("non-finite training loss at batch " + std::to_string(b), b);
    }
    tape.backward(loss);
    tape.clear();
    adam_step(model, opt, lr);
    total += value;
  }
  return batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
}

double validate(const ModelState& model, const PairedSet& val, int batch_size) {
  MetricsReport r = evaluate_pairs(
      [&model](const Tensor& x) {
        Tape tape(false);
        return unet_forward(tape, x, model);
      },
      val, batch_size);
  return r.mean_psnr;
}

bool early_stop_update(EarlyStopState& state, int epoch, double val_psnr) {
  if (val_psnr > state.best_val_psnr + state.improve_eps) {
    state.best_val_psnr = val_psnr;
    state.best_epoch = epoch;
    state.epochs_since_improve = 0;
  } else {
    ++state.epochs_since_improve;
  }
  return state.epochs_since_improve >= state.patience;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return derive_key(derive_key(seed, 0xba7c4), static_cast<std::uint64_t>(epoch));
}

FitResult fit(ModelState& model, AdamState& opt, const PairedSet& train,
              const PairedSet& val, const TrainConfig& cfg, const FitHooks& hooks) {
  cfg.validate();
  set_deterministic(cfg.deterministic);
  FitResult result;
  result.early_stop.patience = cfg.patience;
  result.early_stop.improve_eps = cfg.improve_eps;
  result.initial_val_psnr = validate(model, val);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(train.size(), cfg.batch_size, epoch_seed(cfg.seed, epoch));
    if (epoch == 0) result.first_batch_checksum = degraded_checksum(train, batches.front());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(epoch, cfg);
    rec.train_loss = train_epoch(model, opt, train, batches, rec.lr);
    rec.val_psnr = validate(model, val);
    result.log.push_back(rec);
    result.epochs_run = epoch + 1;

    const int before = result.early_stop.best_epoch;
    const bool stop = early_stop_update(result.early_stop, epoch, rec.val_psnr);
    if (result.early_stop.best_epoch != before && hooks.on_improve) {
      hooks.on_improve(rec, result.early_stop);
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (stop) {
      result.stopped_early = epoch + 1 < cfg.epochs;
      break;
    }
  }
  return result;
}

}  // namespace naf
