#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsal/ops.hpp"
#include "tsal/tensor.hpp"

namespace tsal {

enum class Variant : std::uint8_t { ConvOnly = 0, ConvLstm = 1 };

std::string_view variant_name(Variant v) noexcept;  // "conv" / "convlstm"
Variant parse_variant(std::string_view name);

/// Feature width of the adaptation layers at full scale.
inline constexpr std::size_t kDefaultHiddenChannels = 128;

/// ConvLSTM gates in storage order.
enum class Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Cell = 3 };
inline constexpr std::array<char, 4> kGateNames{'i', 'f', 'o', 'g'};

/// One gate's kernels. The gate bias lives in `input.bias`; `recurrent.bias`
/// is kept at zero and is not a trainable parameter.
struct GateParams {
  Conv2dParams input;      // 1 -> hidden, 3x3, padding 1
  Conv2dParams recurrent;  // hidden -> hidden, 3x3, padding 1
};

/// Parameters of either adaptation architecture plus the shared 1x1 output
/// head. Only the members belonging to `variant` are populated.
struct AdaptationModel {
  Variant variant = Variant::ConvOnly;
  std::size_t hidden = kDefaultHiddenChannels;
  Conv2dParams feature;            // ConvOnly: 1 -> hidden, 3x3, padding 1
  std::array<GateParams, 4> gates; // ConvLstm
  Conv2dParams head;               // hidden -> 1, 1x1, padding 0

  static AdaptationModel zeros(Variant variant, std::size_t hidden = kDefaultHiddenChannels);

  GateParams& gate(Gate g) { return gates[static_cast<std::size_t>(g)]; }
  const GateParams& gate(Gate g) const { return gates[static_cast<std::size_t>(g)]; }
};

/// Gradients have exactly the model's layout.
using ModelGradients = AdaptationModel;

/// Named view of one trainable tensor. Bias vectors appear with shape
/// (len, 1, 1, 1).
struct ParamView {
  std::string name;
  Shape4 shape;
  std::span<double> values;
};

struct ConstParamView {
  std::string name;
  Shape4 shape;
  std::span<const double> values;
};

/// Trainable tensors in a fixed order (the checkpoint and optimizer order).
std::vector<ParamView> parameters(AdaptationModel& model);
std::vector<ConstParamView> parameters(const AdaptationModel& model);

std::size_t parameter_count(const AdaptationModel& model);

/// Kernels ~ U[-s, s] with s = sqrt(1 / fan_in), fan_in = in_channels*kh*kw;
/// biases zero except the forget gate's, which starts at 1.
AdaptationModel init_parameters(Variant variant, std::uint64_t rng_seed,
                                std::size_t hidden = kDefaultHiddenChannels);

struct LstmState {
  Tensor4 hidden;
  Tensor4 cell;

  static LstmState zeros(std::size_t channels, std::size_t height, std::size_t width);
};

/// sigmoid(head(relu(feature(x)))) for a 1x1xHxW map.
Tensor4 conv_block_forward(const Tensor4& static_map, const AdaptationModel& model);

struct LstmStepResult {
  Tensor4 output;
  LstmState state;
};

/// One ConvLSTM step without peepholes:
///   i,f,o = sigmoid(Wx*x + Wh*h + b), g = tanh(Wx*x + Wh*h + b)
///   c' = f.c + i.g,  h' = o.tanh(c'),  y = sigmoid(head(h'))
LstmStepResult convlstm_step(const Tensor4& x, const LstmState& state,
                             const AdaptationModel& model);

/// Activations kept for the backward pass of one time step.
struct StepCache {
  Tensor4 input;
  Tensor4 output;
  // ConvOnly
  Tensor4 pre_relu;
  Tensor4 features;
  // ConvLstm
  Tensor4 prev_hidden;
  Tensor4 prev_cell;
  std::array<Tensor4, 4> gate_values;  // post-activation i, f, o, g
  Tensor4 cell;
  Tensor4 tanh_cell;
  Tensor4 hidden;
};

enum class CacheMode { Keep, Discard };

struct SequenceForward {
  std::vector<Tensor4> outputs;
  std::vector<StepCache> steps;  // empty when run with CacheMode::Discard
  Variant variant = Variant::ConvOnly;
  std::size_t hidden = 0;
  std::size_t cell_evaluations = 0;

  bool has_cache() const noexcept { return !steps.empty() && steps.size() == outputs.size(); }
  void release_cache() { steps.clear(); }
};

/// Runs a sequence of 1x1xHxW maps. ConvOnly maps each frame independently;
/// ConvLstm threads the state from a zero start through every frame.
SequenceForward forward_sequence(std::span<const Tensor4> frames, const AdaptationModel& model,
                                 CacheMode mode = CacheMode::Keep);

/// Backpropagation through the cached sequence. Gradients of kernels shared
/// across time are summed over steps. Throws Errc::StaleCache if the forward
/// pass kept no intermediates or was produced by a differently shaped model.
ModelGradients backward_sequence(const AdaptationModel& model, const SequenceForward& forward,
                                 std::span<const Tensor4> grad_outputs);

}  // namespace tsal
