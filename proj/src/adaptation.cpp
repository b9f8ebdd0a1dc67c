#include "tsal/adaptation.hpp"

#include <cmath>

#include "tsal/error.hpp"
#include "tsal/rng.hpp"

namespace tsal {

std::string_view variant_name(Variant v) noexcept {
  return v == Variant::ConvOnly ? "conv" : "convlstm";
}

Variant parse_variant(std::string_view name) {
  if (name == "conv") return Variant::ConvOnly;
  if (name == "convlstm") return Variant::ConvLstm;
  throw Error(Errc::InvalidArgument, "unknown variant '" + std::string(name) + "' (conv|convlstm)");
}

AdaptationModel AdaptationModel::zeros(Variant variant, std::size_t hidden) {
  if (hidden == 0) throw Error(Errc::InvalidArgument, "hidden channel count must be >= 1");
  AdaptationModel m;
  m.variant = variant;
  m.hidden = hidden;
  if (variant == Variant::ConvOnly) {
    m.feature = Conv2dParams::zeros(hidden, 1, 3, 1);
  } else {
    for (GateParams& g : m.gates) {
      g.input = Conv2dParams::zeros(hidden, 1, 3, 1);
      g.recurrent = Conv2dParams::zeros(hidden, hidden, 3, 1);
    }
  }
  m.head = Conv2dParams::zeros(1, hidden, 1, 0);
  return m;
}

namespace {

template <typename View, typename Model>
std::vector<View> collect_parameters(Model& m) {
  std::vector<View> out;
  auto weight = [&](std::string name, auto& tensor) {
    out.push_back(View{std::move(name), tensor.shape(), tensor.data()});
  };
  auto bias = [&](std::string name, auto& vec) {
    out.push_back(View{std::move(name), Shape4{vec.size(), 1, 1, 1}, {vec.data(), vec.size()}});
  };
  if (m.variant == Variant::ConvOnly) {
    weight("feature.weight", m.feature.weights);
    bias("feature.bias", m.feature.bias);
  } else {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string prefix = std::string("lstm.") + kGateNames[k] + ".";
      weight(prefix + "input_weight", m.gates[k].input.weights);
      weight(prefix + "recurrent_weight", m.gates[k].recurrent.weights);
      bias(prefix + "bias", m.gates[k].input.bias);
    }
  }
  weight("head.weight", m.head.weights);
  bias("head.bias", m.head.bias);
  return out;
}

}  // namespace

std::vector<ParamView> parameters(AdaptationModel& model) {
  return collect_parameters<ParamView>(model);
}

std::vector<ConstParamView> parameters(const AdaptationModel& model) {
  return collect_parameters<ConstParamView>(model);
}

std::size_t parameter_count(const AdaptationModel& model) {
  std::size_t n = 0;
  for (const auto& p : parameters(model)) n += p.values.size();
  return n;
}

AdaptationModel init_parameters(Variant variant, std::uint64_t rng_seed, std::size_t hidden) {
  AdaptationModel m = AdaptationModel::zeros(variant, hidden);
  Rng rng(rng_seed);
  for (ParamView& p : parameters(m)) {
    if (!p.name.ends_with("weight")) continue;
    const double fan_in = static_cast<double>(p.shape.channels * p.shape.height * p.shape.width);
    const double s = std::sqrt(1.0 / fan_in);
    for (double& v : p.values) v = rng.uniform(-s, s);
  }
  if (variant == Variant::ConvLstm) {
    for (double& b : m.gate(Gate::Forget).input.bias) b = 1.0;
  }
  return m;
}

LstmState LstmState::zeros(std::size_t channels, std::size_t height, std::size_t width) {
  return {Tensor4({1, channels, height, width}), Tensor4({1, channels, height, width})};
}

namespace {

void require_frame(const Tensor4& x, const char* what) {
  if (x.batch() != 1 || x.channels() != 1) {
    throw Error(Errc::DimensionMismatch,
                std::string(what) + ": expected a 1x1xHxW map, got " + to_string(x.shape()));
  }
}

void require_variant(const AdaptationModel& m, Variant v, const char* what) {
  if (m.variant != v) {
    throw Error(Errc::InvalidArgument, std::string(what) + " needs a " +
                                           std::string(variant_name(v)) + " model");
  }
}

StepCache conv_step(const Tensor4& x, const AdaptationModel& m) {
  StepCache c;
  c.input = x;
  c.pre_relu = conv2d_forward(x, m.feature);
  c.features = relu(c.pre_relu);
  c.output = sigmoid(conv2d_forward(c.features, m.head));
  return c;
}

StepCache lstm_step(const Tensor4& x, const Tensor4& h, const Tensor4& cprev,
                    const AdaptationModel& m) {
  StepCache s;
  s.input = x;
  s.prev_hidden = h;
  s.prev_cell = cprev;
  for (std::size_t k = 0; k < 4; ++k) {
    Tensor4 pre = conv2d_forward(x, m.gates[k].input);
    add_inplace(pre, conv2d_forward(h, m.gates[k].recurrent));
    s.gate_values[k] = k == static_cast<std::size_t>(Gate::Cell) ? tanh_act(pre) : sigmoid(pre);
  }
  const auto i = s.gate_values[0].data();
  const auto f = s.gate_values[1].data();
  const auto o = s.gate_values[2].data();
  const auto g = s.gate_values[3].data();
  const auto c_prev = cprev.data();
  s.cell = Tensor4(h.shape());
  s.tanh_cell = Tensor4(h.shape());
  s.hidden = Tensor4(h.shape());
  auto c = s.cell.data();
  auto tc = s.tanh_cell.data();
  auto hn = s.hidden.data();
  for (std::size_t j = 0; j < c.size(); ++j) {
    c[j] = f[j] * c_prev[j] + i[j] * g[j];
    tc[j] = std::tanh(c[j]);
    hn[j] = o[j] * tc[j];
  }
  s.cell.require_finite("convlstm_step cell");
  s.output = sigmoid(conv2d_forward(s.hidden, m.head));
  return s;
}

}  // namespace

Tensor4 conv_block_forward(const Tensor4& static_map, const AdaptationModel& model) {
  require_variant(model, Variant::ConvOnly, "conv_block_forward");
  require_frame(static_map, "conv_block_forward");
  return conv_step(static_map, model).output;
}

LstmStepResult convlstm_step(const Tensor4& x, const LstmState& state,
                             const AdaptationModel& model) {
  require_variant(model, Variant::ConvLstm, "convlstm_step");
  require_frame(x, "convlstm_step");
  const Shape4 expected{1, model.hidden, x.height(), x.width()};
  require_same_shape(state.hidden.shape(), expected, "convlstm_step hidden state");
  require_same_shape(state.cell.shape(), expected, "convlstm_step cell state");
  StepCache s = lstm_step(x, state.hidden, state.cell, model);
  return {std::move(s.output), {std::move(s.hidden), std::move(s.cell)}};
}

SequenceForward forward_sequence(std::span<const Tensor4> frames, const AdaptationModel& model,
                                 CacheMode mode) {
  if (frames.empty()) throw Error(Errc::EmptySequence, "forward_sequence: no frames");
  for (const Tensor4& f : frames) {
    require_frame(f, "forward_sequence");
    require_same_shape(f.shape(), frames.front().shape(), "forward_sequence frame");
  }
  SequenceForward out;
  out.variant = model.variant;
  out.hidden = model.hidden;
  out.outputs.reserve(frames.size());
  if (mode == CacheMode::Keep) out.steps.reserve(frames.size());

  const std::size_t h = frames.front().height();
  const std::size_t w = frames.front().width();
  LstmState state = LstmState::zeros(model.hidden, h, w);
  for (const Tensor4& x : frames) {
    StepCache step = model.variant == Variant::ConvOnly
                         ? conv_step(x, model)
                         : lstm_step(x, state.hidden, state.cell, model);
    ++out.cell_evaluations;
    if (model.variant == Variant::ConvLstm) {
      state.hidden = step.hidden;
      state.cell = step.cell;
    }
    out.outputs.push_back(step.output);
    if (mode == CacheMode::Keep) out.steps.push_back(std::move(step));
  }
  return out;
}

namespace {

void accumulate(Conv2dParams& dst, const Conv2dGrads& g, bool with_bias) {
  add_inplace(dst.weights, g.weights);
  if (with_bias) {
    for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += g.bias[i];
  }
}

}  // namespace

ModelGradients backward_sequence(const AdaptationModel& model, const SequenceForward& forward,
                                 std::span<const Tensor4> grad_outputs) {
  if (!forward.has_cache()) {
    throw Error(Errc::StaleCache, "backward_sequence: forward pass kept no intermediates");
  }
  if (forward.variant != model.variant || forward.hidden != model.hidden) {
    throw Error(Errc::StaleCache, "backward_sequence: cache was produced by a different model");
  }
  if (grad_outputs.size() != forward.outputs.size()) {
    throw Error(Errc::LengthMismatch, "backward_sequence: " + std::to_string(grad_outputs.size()) +
                                          " gradients for " +
                                          std::to_string(forward.outputs.size()) + " outputs");
  }
  for (std::size_t t = 0; t < grad_outputs.size(); ++t) {
    require_same_shape(grad_outputs[t].shape(), forward.outputs[t].shape(),
                       "backward_sequence grad_output");
  }

  ModelGradients grads = ModelGradients::zeros(model.variant, model.hidden);

  if (model.variant == Variant::ConvOnly) {
    for (std::size_t t = 0; t < forward.steps.size(); ++t) {
      const StepCache& s = forward.steps[t];
      const Tensor4 dz = sigmoid_backward_from_output(s.output, grad_outputs[t]);
      const Conv2dGrads gh = conv2d_backward(s.features, model.head, dz);
      accumulate(grads.head, gh, true);
      const Tensor4 da = relu_backward(s.pre_relu, gh.input);
      accumulate(grads.feature, conv2d_backward(s.input, model.feature, da), true);
    }
    return grads;
  }

  const Shape4 state_shape = forward.steps.front().hidden.shape();
  Tensor4 dh_next(state_shape);
  Tensor4 dc_next(state_shape);
  for (std::size_t t = forward.steps.size(); t-- > 0;) {
    const StepCache& s = forward.steps[t];
    const Tensor4 dz = sigmoid_backward_from_output(s.output, grad_outputs[t]);
    const Conv2dGrads gh = conv2d_backward(s.hidden, model.head, dz);
    accumulate(grads.head, gh, true);

    const auto i = s.gate_values[0].data();
    const auto f = s.gate_values[1].data();
    const auto o = s.gate_values[2].data();
    const auto g = s.gate_values[3].data();
    const auto tc = s.tanh_cell.data();
    const auto c_prev = s.prev_cell.data();
    const auto dh_head = gh.input.data();
    const auto dh_carry = dh_next.data();
    const auto dc_carry = dc_next.data();

    // Gradients w.r.t. gate pre-activations, in gate order i, f, o, g.
    std::array<Tensor4, 4> dpre{Tensor4(state_shape), Tensor4(state_shape), Tensor4(state_shape),
                                Tensor4(state_shape)};
    Tensor4 dc_prev(state_shape);
    auto dpi = dpre[0].data();
    auto dpf = dpre[1].data();
    auto dpo = dpre[2].data();
    auto dpg = dpre[3].data();
    auto dcp = dc_prev.data();
    for (std::size_t j = 0; j < i.size(); ++j) {
      const double dh = dh_head[j] + dh_carry[j];
      const double dc = dc_carry[j] + dh * o[j] * (1.0 - tc[j] * tc[j]);
      dpo[j] = (dh * tc[j]) * (o[j] * (1.0 - o[j]));
      dpi[j] = (dc * g[j]) * (i[j] * (1.0 - i[j]));
      dpf[j] = (dc * c_prev[j]) * (f[j] * (1.0 - f[j]));
      dpg[j] = (dc * i[j]) * (1.0 - g[j] * g[j]);
      dcp[j] = dc * f[j];
    }

    Tensor4 dh_prev(state_shape);
    for (std::size_t k = 0; k < 4; ++k) {
      accumulate(grads.gates[k].input, conv2d_backward(s.input, model.gates[k].input, dpre[k]),
                 true);
      // At t = 0 the previous hidden state is the zero start: no kernel
      // gradient and nothing further to propagate.
      if (t == 0) continue;
      const Conv2dGrads gr = conv2d_backward(s.prev_hidden, model.gates[k].recurrent, dpre[k]);
      accumulate(grads.gates[k].recurrent, gr, false);
      add_inplace(dh_prev, gr.input);
    }
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
  return grads;
}

}  // namespace tsal
