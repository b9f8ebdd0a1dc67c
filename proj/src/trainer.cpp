#include "tsal/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <zlib.h>

#include "tsal/error.hpp"
#include "tsal/rng.hpp"

namespace tsal {

BceResult bce_loss(const Tensor4& pred, const Tensor4& target) {
  require_same_shape(pred.shape(), target.shape(), "bce_loss");
  pred.require_finite("bce_loss prediction");
  target.require_finite("bce_loss target");
  const auto p = pred.data();
  const auto t = target.data();
  const double n = static_cast<double>(p.size());
  BceResult r{0.0, Tensor4(pred.shape())};
  auto g = r.grad.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0)
      throw Error(Errc::OutOfRange, "bce_loss: prediction outside [0, 1]");
    if (t[i] < 0.0 || t[i] > 1.0) throw Error(Errc::OutOfRange, "bce_loss: target outside [0, 1]");
    const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    acc += t[i] * std::log(pc) + (1.0 - t[i]) * std::log1p(-pc);
    g[i] = ((1.0 - t[i]) / (1.0 - pc) - t[i] / pc) / n;
  }
  r.loss = -acc / n;
  return r;
}

OptimizerState OptimizerState::fresh(const AdaptationModel& model, const SgdHyper& hyper) {
  OptimizerState s;
  s.hyper = hyper;
  s.lr = hyper.lr0;
  for (const auto& p : parameters(model)) s.momentum_buffers.emplace_back(p.values.size(), 0.0);
  return s;
}

double lr_schedule(const SgdHyper& hyper, std::size_t completed_epochs) {
  if (hyper.decay_every == 0) throw Error(Errc::InvalidArgument, "decay_every must be >= 1");
  double lr = hyper.lr0;
  for (std::size_t k = completed_epochs / hyper.decay_every; k > 0; --k) lr *= hyper.decay_factor;
  return lr;
}

void sgd_update(std::span<double> weights, std::span<const double> grads,
                std::span<double> velocity, double lr, const SgdHyper& hyper) {
  if (grads.size() != weights.size() || velocity.size() != weights.size())
    throw Error(Errc::ShapeMismatch, "sgd_update: weight, gradient and buffer sizes differ");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = grads[i] + hyper.weight_decay * weights[i];
    velocity[i] = hyper.momentum * velocity[i] + g;
    weights[i] -= lr * velocity[i];
  }
}

void sgd_step(AdaptationModel& model, const ModelGradients& grads, OptimizerState& state) {
  if (grads.variant != model.variant || grads.hidden != model.hidden)
    throw Error(Errc::ShapeMismatch, "sgd_step: gradients belong to a different model layout");
  auto params = parameters(model);
  const auto g = parameters(grads);
  if (state.momentum_buffers.size() != params.size())
    throw Error(Errc::ShapeMismatch, "sgd_step: optimizer has " +
                                         std::to_string(state.momentum_buffers.size()) +
                                         " buffers for " + std::to_string(params.size()) +
                                         " parameter tensors");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (g[k].shape != params[k].shape || state.momentum_buffers[k].size() != params[k].values.size())
      throw Error(Errc::ShapeMismatch, "sgd_step: shape mismatch at " + params[k].name);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    sgd_update(params[k].values, g[k].values, state.momentum_buffers[k], state.lr, state.hyper);
    for (double w : params[k].values)
      if (!std::isfinite(w)) throw Error(Errc::NonFinite, "sgd_step: " + params[k].name + " became non-finite");
  }
  ++state.step_count;
}

double gradient_norm(const ModelGradients& grads) {
  double acc = 0.0;
  for (const auto& p : parameters(grads))
    for (double v : p.values) acc += v * v;
  return std::sqrt(acc);
}

double clip_gradients(ModelGradients& grads, double max_norm) {
  const double norm = gradient_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : parameters(grads))
      for (double& v : p.values) v *= s;
  }
  return norm;
}

void validate_training_data(std::span<const TrainingSequence> data, const TrainConfig& config) {
  if (config.epochs == 0) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
  if (config.clip_length == 0) throw Error(Errc::InvalidArgument, "clip_length must be >= 1");
  if (config.hyper.decay_every == 0) throw Error(Errc::InvalidArgument, "decay_every must be >= 1");
  if (data.empty()) throw Error(Errc::EmptyDataset, "training set has no videos");
  bool any_frames = false;
  for (const TrainingSequence& seq : data) {
    if (seq.inputs.size() != seq.targets.size())
      throw Error(Errc::LengthMismatch, "video '" + seq.id + "': " + std::to_string(seq.inputs.size()) +
                                            " inputs vs " + std::to_string(seq.targets.size()) + " targets");
    for (std::size_t t = 0; t < seq.inputs.size(); ++t)
      require_same_shape(seq.inputs[t].shape(), seq.targets[t].shape(), ("video '" + seq.id + "' frame " + std::to_string(t)).c_str());
    any_frames |= !seq.inputs.empty();
  }
  if (!any_frames) throw Error(Errc::EmptyDataset, "training set has no frames");
}

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

struct WindowPass {
  double loss = 0.0;
  ModelGradients grads;
};

WindowPass run_window(const AdaptationModel& model, std::span<const Tensor4> inputs,
                      std::span<const Tensor4> targets) {
  SequenceForward fwd = forward_sequence(inputs, model);
  std::vector<Tensor4> grad_out;
  grad_out.reserve(inputs.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    BceResult b = bce_loss(fwd.outputs[t], targets[t]);
    loss += b.loss;
    grad_out.push_back(std::move(b.grad));
  }
  return {loss, backward_sequence(model, fwd, grad_out)};
}

}  // namespace

TrainResult train(AdaptationModel model, std::span<const TrainingSequence> data,
                  const TrainConfig& config) {
  validate_training_data(data, config);
  TrainResult result{std::move(model), {}, {}};
  result.optimizer = OptimizerState::fresh(result.model, config.hyper);
  OptimizerState& opt = result.optimizer;
  bool done = false;
  for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
    opt.lr = lr_schedule(config.hyper, epoch);
    for (std::size_t v : shuffled_order(data.size(), config.seed, epoch)) {
      const TrainingSequence& seq = data[v];
      for (std::size_t first = 0; first < seq.inputs.size() && !done; first += config.clip_length) {
        const std::size_t len = std::min(config.clip_length, seq.inputs.size() - first);
        try {
          WindowPass pass = run_window(result.model, std::span(seq.inputs).subspan(first, len),
                                       std::span(seq.targets).subspan(first, len));
          clip_gradients(pass.grads, config.clip_norm);
          const double lr = opt.lr;
          sgd_step(result.model, pass.grads, opt);
          result.history.push_back({opt.step_count, epoch, seq.id, first, len, pass.loss, lr});
        } catch (const Error& e) {
          throw Error(e.code(), "training window video '" + seq.id + "' frames " + std::to_string(first) +
                                    ".." + std::to_string(first + len - 1) + " (epoch " +
                                    std::to_string(epoch) + "): " + e.what());
        }
        done = config.max_steps != 0 && opt.step_count >= config.max_steps;
      }
      if (done) break;
    }
    if (!config.checkpoint_path.empty()) save_checkpoint(result.model, opt, config.checkpoint_path);
  }
  return result;
}

double dataset_bce(const AdaptationModel& model, std::span<const TrainingSequence> data,
                   std::size_t clip_length) {
  if (clip_length == 0) throw Error(Errc::InvalidArgument, "clip_length must be >= 1");
  double total = 0.0;
  std::size_t frames = 0;
  for (const TrainingSequence& seq : data) {
    for (std::size_t first = 0; first < seq.inputs.size(); first += clip_length) {
      const std::size_t len = std::min(clip_length, seq.inputs.size() - first);
      SequenceForward fwd =
          forward_sequence(std::span(seq.inputs).subspan(first, len), model, CacheMode::Discard);
      for (std::size_t t = 0; t < len; ++t) total += bce_loss(fwd.outputs[t], seq.targets[first + t]).loss;
      frames += len;
    }
  }
  if (frames == 0) throw Error(Errc::EmptyDataset, "dataset_bce: no frames");
  return total / static_cast<double>(frames);
}

void save_loss_history(const std::filesystem::path& path, std::span<const WindowRecord> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "step,loss\n";
  char buf[64];
  for (const WindowRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g\n", static_cast<unsigned long long>(r.step), r.loss);
    out << buf;
  }
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[4] = {'T', 'S', 'A', 'L'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(Errc::CorruptCheckpoint, "checkpoint truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw Error(Errc::InvalidArgument, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

void write_tensor(ByteWriter& w, const std::string& name, const Shape4& shape,
                  std::span<const double> values) {
  if (name.size() > UINT16_MAX) throw Error(Errc::InvalidArgument, "tensor name too long");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.raw(name.data(), name.size());
  for (std::size_t d : {shape.batch, shape.channels, shape.height, shape.width}) w.u32(checked_u32(d, "dim"));
  for (double v : values) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw Error(Errc::NonFinite, "checkpoint: " + name + " is not finite at 32-bit");
    w.u32(std::bit_cast<std::uint32_t>(f));
  }
}

// Reads one tensor record and checks it against the expected layout entry.
void read_tensor(ByteReader& r, const std::string& want_name, const Shape4& want_shape,
                 std::span<double> dst) {
  const std::uint16_t len = r.u16();
  auto name_bytes = r.take(len);
  const std::string name(name_bytes.begin(), name_bytes.end());
  if (name != want_name)
    throw Error(Errc::CorruptCheckpoint, "checkpoint tensor '" + name + "' where '" + want_name + "' expected");
  Shape4 s{r.u32(), r.u32(), r.u32(), r.u32()};
  if (!(s == want_shape))
    throw Error(Errc::CorruptCheckpoint, "checkpoint tensor '" + name + "' has shape " + to_string(s) +
                                             ", expected " + to_string(want_shape));
  for (double& v : dst) {
    const float f = std::bit_cast<float>(r.u32());
    if (!std::isfinite(f)) throw Error(Errc::CorruptCheckpoint, "checkpoint tensor '" + name + "' holds non-finite data");
    v = static_cast<double>(f);
  }
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const AdaptationModel& model, const OptimizerState& state) {
  if (model.hidden > UINT16_MAX) throw Error(Errc::InvalidArgument, "hidden channel count exceeds 16 bits");
  const auto params = parameters(model);
  if (!state.momentum_buffers.empty() && state.momentum_buffers.size() != params.size())
    throw Error(Errc::ShapeMismatch, "checkpoint: optimizer buffers do not match the model");
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(model.variant));
  w.u16(static_cast<std::uint16_t>(model.hidden));
  w.u32(checked_u32(params.size(), "tensor count"));
  for (const auto& p : params) write_tensor(w, p.name, p.shape, p.values);
  w.u32(checked_u32(state.momentum_buffers.size(), "buffer count"));
  for (std::size_t k = 0; k < state.momentum_buffers.size(); ++k) {
    if (state.momentum_buffers[k].size() != params[k].values.size())
      throw Error(Errc::ShapeMismatch, "checkpoint: optimizer buffer for " + params[k].name + " has the wrong size");
    write_tensor(w, params[k].name, params[k].shape, state.momentum_buffers[k]);
  }
  w.u32(crc_of(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw Error(Errc::CorruptCheckpoint, "not a checkpoint (bad magic)");
  if (bytes.size() < 4 + 2 + 1 + 2 + 4 + 4 + 4) throw Error(Errc::CorruptCheckpoint, "checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  if (crc_of(body) != tail.u32())
    throw Error(Errc::CorruptCheckpoint, "checkpoint CRC mismatch (truncated or corrupted file)");

  ByteReader r(body);
  r.take(4);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw Error(Errc::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  const std::uint8_t variant_byte = r.u8();
  if (variant_byte > 1) throw Error(Errc::CorruptCheckpoint, "unknown variant byte " + std::to_string(variant_byte));
  const std::uint16_t hidden = r.u16();
  if (hidden == 0) throw Error(Errc::CorruptCheckpoint, "checkpoint hidden channel count is zero");

  Checkpoint ck{AdaptationModel::zeros(static_cast<Variant>(variant_byte), hidden), {}};
  auto params = parameters(ck.model);
  const std::uint32_t count = r.u32();
  if (count != params.size())
    throw Error(Errc::CorruptCheckpoint, "checkpoint holds " + std::to_string(count) + " tensors, " +
                                             std::string(variant_name(ck.model.variant)) + " expects " +
                                             std::to_string(params.size()));
  for (auto& p : params) read_tensor(r, p.name, p.shape, p.values);

  ck.optimizer = OptimizerState::fresh(ck.model);
  const std::uint32_t buffers = r.u32();
  if (buffers != 0 && buffers != params.size())
    throw Error(Errc::CorruptCheckpoint, "checkpoint holds " + std::to_string(buffers) + " optimizer buffers for " +
                                             std::to_string(params.size()) + " parameters");
  for (std::uint32_t k = 0; k < buffers; ++k)
    read_tensor(r, params[k].name, params[k].shape, ck.optimizer.momentum_buffers[k]);
  if (r.remaining() != 0) throw Error(Errc::CorruptCheckpoint, "trailing bytes after checkpoint payload");
  return ck;
}

void save_checkpoint(const AdaptationModel& model, const OptimizerState& state,
                     const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model, state);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw Error(Errc::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, Variant expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.model.variant != expected)
    throw Error(Errc::CorruptCheckpoint, path.string() + ": variant mismatch, file holds " +
                                             std::string(variant_name(ck.model.variant)) + " but " +
                                             std::string(variant_name(expected)) + " was requested");
  return ck;
}

}  // namespace tsal
