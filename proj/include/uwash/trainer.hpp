#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uwash/signal_data.hpp"
#include "uwash/uwash_net.hpp"

namespace uwash {

struct WindowBatch {
  Tensor accel;  // (B, 3, L)
  Tensor gyro;   // (B, 3, L)
  std::vector<int> labels;  // (b, t) row-major
};

WindowBatch make_batch(std::span<const Window* const> windows);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 256;   // the reference setup used 16384
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  // Stop once the epoch loss moved by less than `plateau_tolerance`
  // (relative) over the last `plateau_window` epochs. 0 disables.
  std::size_t plateau_window = 0;
  double plateau_tolerance = 1e-3;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean sample cross-entropy over the epoch
  double accuracy = 0.0;  // sample accuracy of the train-mode outputs
};

struct TrainingLog {
  double initial_loss = 0.0;  // first batch, before any update
  std::vector<EpochStats> epochs;
  bool stopped_on_plateau = false;

  std::string to_csv() const;
};

// Stride-`stride` windows of length `length` over every series.
std::vector<Window> make_training_windows(std::span<const SampleSeries> corpus, std::size_t length,
                                          std::size_t stride);

using EpochCallback = std::function<void(const EpochStats&)>;

// Adam on mean sample-wise cross-entropy. Deterministic for a given seed.
// The returned model is rounded to checkpoint precision.
TrainingLog train(UWashModel& model, std::span<const Window> windows, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace uwash
