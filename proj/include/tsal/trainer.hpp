#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsal/adaptation.hpp"
#include "tsal/tensor.hpp"

namespace tsal {

struct BceResult {
  double loss = 0.0;
  Tensor4 grad;
};

inline constexpr double kBceClamp = 1e-7;

/// Mean per-pixel binary cross-entropy. Predictions are clamped to
/// [1e-7, 1 - 1e-7] before the logs; the gradient is evaluated at the
/// clamped value.
BceResult bce_loss(const Tensor4& pred, const Tensor4& target);

struct SgdHyper {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr0 = 1e-5;
  double decay_factor = 0.1;
  std::size_t decay_every = 3;  // epochs
};

struct OptimizerState {
  std::vector<std::vector<double>> momentum_buffers;  // parameters() order
  double lr = 1e-5;
  std::uint64_t step_count = 0;
  SgdHyper hyper;

  /// Zero buffers shaped like the model's parameters, lr = lr0.
  static OptimizerState fresh(const AdaptationModel& model, const SgdHyper& hyper = {});
};

/// lr0 * decay_factor ^ floor(completed_epochs / decay_every).
double lr_schedule(const SgdHyper& hyper, std::size_t completed_epochs);

/// One parameter tensor:  g' = g + wd*w;  v = mu*v + g';  w -= lr*v.
void sgd_update(std::span<double> weights, std::span<const double> grads,
                std::span<double> velocity, double lr, const SgdHyper& hyper);

/// sgd_update over every parameter tensor, then step_count += 1.
void sgd_step(AdaptationModel& model, const ModelGradients& grads, OptimizerState& state);

double gradient_norm(const ModelGradients& grads);

/// Rescales grads to global L2 norm `max_norm` when it is exceeded. Returns
/// the norm before clipping.
double clip_gradients(ModelGradients& grads, double max_norm);

/// One video's aligned static-map and ground-truth sequences (1x1xHxW each).
struct TrainingSequence {
  std::string id;
  std::vector<Tensor4> inputs;
  std::vector<Tensor4> targets;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t clip_length = 16;
  std::uint64_t seed = 0;
  SgdHyper hyper;
  double clip_norm = 10.0;          // <= 0 disables clipping
  std::size_t max_steps = 0;        // 0 = no limit
  std::filesystem::path checkpoint_path;  // empty = no checkpoints
};

struct WindowRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::string video_id;
  std::size_t first_frame = 0;
  std::size_t frames = 0;
  double loss = 0.0;  // BCE summed over the window's frames
  double lr = 0.0;
};

struct TrainResult {
  AdaptationModel model;
  OptimizerState optimizer;
  std::vector<WindowRecord> history;
};

/// Validates the dataset and config; throws EmptyDataset, LengthMismatch,
/// DimensionMismatch or InvalidArgument.
void validate_training_data(std::span<const TrainingSequence> data, const TrainConfig& config);

/// Epochs x videos (order shuffled per epoch from `seed`) x windows of
/// clip_length frames, one optimizer step per window. State resets at every
/// window.
TrainResult train(AdaptationModel model, std::span<const TrainingSequence> data,
                  const TrainConfig& config);

/// Mean per-frame BCE of the model over the whole dataset, run in the same
/// windows as training.
double dataset_bce(const AdaptationModel& model, std::span<const TrainingSequence> data,
                   std::size_t clip_length);

/// "step,loss" CSV, one row per window, losses printed round-trip exact.
void save_loss_history(const std::filesystem::path& path, std::span<const WindowRecord> history);

struct Checkpoint {
  AdaptationModel model;
  OptimizerState optimizer;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Little-endian binary file, 32-bit float payload, trailing CRC-32. Written
/// to a temporary sibling and renamed into place.
void save_checkpoint(const AdaptationModel& model, const OptimizerState& state,
                     const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const AdaptationModel& model,
                                            const OptimizerState& state);

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Throws CorruptCheckpoint on any format violation, including a variant
/// other than `expected` when one is given.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, Variant expected);

}  // namespace tsal
