#include "uwash/trainer.hpp"

#include <cmath>
#include <numeric>

#include "uwash/adam.hpp"
#include "uwash/kv_config.hpp"
#include "uwash/ops.hpp"
#include "uwash/rng.hpp"

namespace uwash {

WindowBatch make_batch(std::span<const Window* const> windows) {
  if (windows.empty()) throw Error("uwash-net", "empty batch");
  const std::size_t batch = windows.size(), len = windows.front()->length;
  WindowBatch out{Tensor({batch, 3, len}), Tensor({batch, 3, len}), std::vector<int>(batch * len)};
  for (std::size_t b = 0; b < batch; ++b) {
    const Window& w = *windows[b];
    if (w.length != len) throw Error("uwash-net", "windows in a batch differ in length");
    const auto a = w.accel_slice();
    const auto g = w.gyro_slice();
    const auto y = w.label_slice();
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.accel.at(b, c, t) = a[t][c];
        out.gyro.at(b, c, t) = g[t][c];
      }
      out.labels[b * len + t] = y[t];
    }
  }
  return out;
}

std::string TrainingLog::to_csv() const {
  std::string out = "epoch,loss,accuracy\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.loss) + "," + format_double(e.accuracy) + "\n";
  }
  return out;
}

std::vector<Window> make_training_windows(std::span<const SampleSeries> corpus, std::size_t length,
                                          std::size_t stride) {
  std::vector<Window> out;
  for (const auto& series : corpus) {
    if (series.size() < length) continue;
    auto w = extract_windows(series, length, stride);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

TrainingLog train(UWashModel& model, std::span<const Window> windows, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (windows.empty()) throw Error("uwash-net", "training set is empty");
  if (config.batch == 0) throw Error("uwash-net", "batch size must be positive");
  for (const auto& w : windows) {
    if (w.length != model.config().input_length) {
      throw Error("uwash-net", "training window length " + std::to_string(w.length) + " does not match model input " +
                                   std::to_string(model.config().input_length));
    }
  }

  auto params = model.params();
  nn::AdamState adam(nn::AdamConfig{.lr = config.lr}, params);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Window*> batch_windows;

  TrainingLog log;
  bool first = true;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {0x7472616Eu, epoch}));
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0, samples = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      batch_windows.clear();
      for (std::size_t i = start; i < end; ++i) batch_windows.push_back(&windows[order[i]]);
      const WindowBatch batch = make_batch(batch_windows);

      model.zero_grad();
      const Tensor logits = model.forward(batch.accel, batch.gyro, nn::Mode::train);
      const auto loss = nn::softmax_cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss.loss)) throw Error("uwash-net", "training loss became non-finite");
      if (first) {
        log.initial_loss = loss.loss;
        first = false;
      }
      model.backward(loss.grad_logits);
      nn::adam_step(params, adam);

      loss_sum += loss.loss * static_cast<double>(batch.labels.size());
      correct += loss.correct;
      samples += batch.labels.size();
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(samples),
                     static_cast<double>(correct) / static_cast<double>(samples)};
    log.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);

    const std::size_t win = config.plateau_window;
    if (win > 0 && log.epochs.size() > win) {
      const double before = log.epochs[log.epochs.size() - 1 - win].loss;
      if (std::abs(stats.loss - before) < config.plateau_tolerance * std::abs(before)) {
        log.stopped_on_plateau = true;
        break;
      }
    }
  }
  model.round_to_storage_precision();
  return log;
}

}  // namespace uwash
