#include "tsal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>

#include "tsal/error.hpp"
#include "tsal/parallel.hpp"
#include "tsal/rng.hpp"
#include "tsal/simd/kernels.hpp"

namespace tsal {

namespace {

void validate_value(double v) {
  if (!std::isfinite(v)) throw Error(Errc::NonFinite, "saliency map: non-finite value");
  if (v < 0.0) throw Error(Errc::OutOfRange, "saliency map: negative value " + std::to_string(v));
}

}  // namespace

SaliencyMap::SaliencyMap(std::size_t height, std::size_t width, double fill)
    : SaliencyMap(height, width, std::vector<double>(height * width, fill)) {}

SaliencyMap::SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0) {
    throw Error(Errc::InvalidArgument, "saliency map needs at least one pixel");
  }
  if (values_.size() != height_ * width_) {
    throw Error(Errc::DimensionMismatch,
                "saliency map " + std::to_string(height_) + "x" + std::to_string(width_) +
                    " given " + std::to_string(values_.size()) + " values");
  }
  for (double v : values_) validate_value(v);
}

void SaliencyMap::set(std::size_t row, std::size_t col, double value) {
  validate_value(value);
  values_[row * width_ + col] = value;
}

double SaliencyMap::total() const noexcept {
  return simd::kernels().sum(values_.data(), values_.size());
}

std::string_view metric_key(Metric m) noexcept {
  switch (m) {
    case Metric::AucJudd: return "auc_j";
    case Metric::ShuffledAuc: return "s_auc";
    case Metric::Nss: return "nss";
    case Metric::Cc: return "cc";
    case Metric::Sim: return "sim";
  }
  return "";
}

std::string_view metric_label(Metric m) noexcept {
  switch (m) {
    case Metric::AucJudd: return "AUC-J";
    case Metric::ShuffledAuc: return "sAUC";
    case Metric::Nss: return "NSS";
    case Metric::Cc: return "CC";
    case Metric::Sim: return "SIM";
  }
  return "";
}

std::optional<Metric> parse_metric(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const std::string wanted = lower(name);
  for (Metric m : kAllMetrics) {
    if (wanted == metric_key(m) || wanted == lower(metric_label(m))) return m;
  }
  return std::nullopt;
}

std::optional<double>& MetricScores::operator[](Metric m) noexcept {
  switch (m) {
    case Metric::AucJudd: return auc_j;
    case Metric::ShuffledAuc: return s_auc;
    case Metric::Nss: return nss;
    case Metric::Cc: return cc;
    case Metric::Sim: return sim;
  }
  return nss;
}

const std::optional<double>& MetricScores::operator[](Metric m) const noexcept {
  return const_cast<MetricScores&>(*this)[m];
}

bool EvalOptions::wants(Metric m) const noexcept {
  return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
}

namespace {

void require_in_bounds(const SaliencyMap& map, const FixationSet& fix, const char* what) {
  for (const Fixation& p : fix.points) {
    if (p.row >= map.height() || p.col >= map.width()) {
      throw Error(Errc::OutOfBounds, std::string(what) + ": fixation (" + std::to_string(p.row) +
                                         "," + std::to_string(p.col) + ") outside " +
                                         std::to_string(map.height()) + "x" +
                                         std::to_string(map.width()) + " map");
    }
  }
}

void require_fixations(const FixationSet& fix, const char* what) {
  if (fix.empty()) throw Error(Errc::EmptyFixations, std::string(what) + ": no fixations");
}

void require_same_dims(const SaliencyMap& a, const SaliencyMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(Errc::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.height()) + "x" +
                    std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                    std::to_string(b.width()));
  }
}

// Exact test: a rounded mean can leave constant maps with a tiny nonzero
// spread, so zero variance is decided on the raw values.
bool is_constant(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

std::vector<double> centered(std::span<const double> v, double mean) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= mean;
  return out;
}

std::vector<double> values_at(const SaliencyMap& map, const FixationSet& fix) {
  std::vector<double> out;
  out.reserve(fix.size());
  for (const Fixation& p : fix.points) out.push_back(map.at(p.row, p.col));
  return out;
}

}  // namespace

double roc_area(std::span<const double> positives, std::span<const double> negatives,
                AucThresholds thresholds) {
  if (positives.empty()) throw Error(Errc::EmptyFixations, "roc_area: no positives");
  if (negatives.empty()) throw Error(Errc::EmptyNegatives, "roc_area: no negatives");

  std::vector<double> pos(positives.begin(), positives.end());
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  std::vector<double> cuts = pos;
  if (thresholds == AucThresholds::AllValues) cuts.insert(cuts.end(), neg.begin(), neg.end());
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // Twice the area times |pos|*|neg| is an integer: accumulate it exactly and
  // divide once.
  std::uint64_t doubled = 0;
  std::uint64_t tp_prev = 0, fp_prev = 0;
  std::size_t ip = 0, in = 0;
  for (double t : cuts) {
    while (ip < pos.size() && pos[ip] >= t) ++ip;
    while (in < neg.size() && neg[in] >= t) ++in;
    doubled += (in - fp_prev) * (ip + tp_prev);
    tp_prev = ip;
    fp_prev = in;
  }
  const std::uint64_t n_pos = pos.size(), n_neg = neg.size();
  doubled += (n_neg - fp_prev) * (n_pos + tp_prev);
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double nss(const SaliencyMap& map, const FixationSet& fix) {
  require_fixations(fix, "nss");
  require_in_bounds(map, fix, "nss");
  const auto v = map.values();
  if (is_constant(v)) return 0.0;
  const auto& k = simd::kernels();
  const double n = static_cast<double>(v.size());
  const double mean = k.sum(v.data(), v.size()) / n;
  const std::vector<double> c = centered(v, mean);
  const double sd = std::sqrt(k.dot(c.data(), c.data(), c.size()) / n);
  if (sd == 0.0) return 0.0;
  double acc = 0.0;
  for (const Fixation& p : fix.points) acc += (map.at(p.row, p.col) - mean) / sd;
  return acc / static_cast<double>(fix.size());
}

std::optional<double> cc(const SaliencyMap& map, const SaliencyMap& gt) {
  require_same_dims(map, gt, "cc");
  if (is_constant(map.values()) || is_constant(gt.values())) return std::nullopt;
  const auto& k = simd::kernels();
  const double n = static_cast<double>(map.size());
  const auto a = centered(map.values(), map.total() / n);
  const auto b = centered(gt.values(), gt.total() / n);
  const double va = k.dot(a.data(), a.data(), a.size());
  const double vb = k.dot(b.data(), b.data(), b.size());
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  const double r = k.dot(a.data(), b.data(), a.size()) / std::sqrt(va * vb);
  return std::clamp(r, -1.0, 1.0);
}

double sim(const SaliencyMap& map, const SaliencyMap& gt) {
  require_same_dims(map, gt, "sim");
  const double sa = map.total();
  const double sb = gt.total();
  if (sa <= 0.0) throw Error(Errc::ZeroMass, "sim: prediction map sums to zero");
  if (sb <= 0.0) throw Error(Errc::ZeroMass, "sim: ground-truth map sums to zero");
  const auto a = map.values();
  const auto b = gt.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::min(a[i] / sa, b[i] / sb);
  return std::clamp(acc, 0.0, 1.0);
}

double auc_judd(const SaliencyMap& map, const FixationSet& fix, AucThresholds thresholds) {
  require_fixations(fix, "auc_judd");
  require_in_bounds(map, fix, "auc_judd");
  std::vector<bool> fixated(map.size(), false);
  for (const Fixation& p : fix.points) fixated[p.row * map.width() + p.col] = true;

  std::vector<double> negatives;
  negatives.reserve(map.size());
  const auto v = map.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!fixated[i]) negatives.push_back(v[i]);
  if (negatives.empty()) throw Error(Errc::AllFixated, "auc_judd: every pixel is fixated");
  return roc_area(values_at(map, fix), negatives, thresholds);
}

double shuffled_auc(const SaliencyMap& map, const FixationSet& fix, const FixationSet& other_fix,
                    std::uint64_t rng_seed, AucThresholds thresholds) {
  require_fixations(fix, "shuffled_auc");
  if (other_fix.empty()) throw Error(Errc::EmptyNegatives, "shuffled_auc: empty negative pool");
  require_in_bounds(map, fix, "shuffled_auc");
  require_in_bounds(map, other_fix, "shuffled_auc negatives");

  std::vector<double> negatives = values_at(map, other_fix);
  const std::size_t cap = kShuffledNegativesPerPositive * fix.size();
  if (negatives.size() > cap) {
    // Partial Fisher-Yates: the first `cap` slots become a uniform sample
    // without replacement.
    Rng rng(rng_seed);
    for (std::size_t i = 0; i < cap; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(negatives.size() - i));
      std::swap(negatives[i], negatives[j]);
    }
    negatives.resize(cap);
  }
  return roc_area(values_at(map, fix), negatives, thresholds);
}

namespace {

struct FrameScores {
  MetricScores scores;
  bool has_fixations = false;
  bool has_gt_mass = false;
};

FrameScores score_frame(const SaliencyMap& map, const FixationSet& fix, const SaliencyMap& gt,
                        const FixationSet& pool, std::uint64_t seed, const EvalOptions& opt) {
  FrameScores out;
  out.has_fixations = !fix.empty();
  out.has_gt_mass = gt.total() > 0.0;
  if (out.has_fixations) {
    if (opt.wants(Metric::Nss)) out.scores.nss = nss(map, fix);
    if (opt.wants(Metric::AucJudd)) {
      try {
        out.scores.auc_j = auc_judd(map, fix, opt.thresholds);
      } catch (const Error& e) {
        if (e.code() != Errc::AllFixated) throw;
      }
    }
    if (opt.wants(Metric::ShuffledAuc) && !pool.empty()) {
      out.scores.s_auc = shuffled_auc(map, fix, pool, seed, opt.thresholds);
    }
  }
  if (out.has_gt_mass) {
    if (opt.wants(Metric::Cc)) out.scores.cc = cc(map, gt);
    if (opt.wants(Metric::Sim) && map.total() > 0.0) out.scores.sim = sim(map, gt);
  }
  return out;
}

bool fixation_based(Metric m) {
  return m == Metric::Nss || m == Metric::AucJudd || m == Metric::ShuffledAuc;
}

}  // namespace

VideoEvaluation evaluate_video(std::span<const SaliencyMap> maps,
                               std::span<const FixationSet> fixs,
                               std::span<const SaliencyMap> gts, const FixationSet& shuffle_pool,
                               std::uint64_t seed, const EvalOptions& options) {
  if (maps.empty() || maps.size() != fixs.size() || maps.size() != gts.size()) {
    throw Error(Errc::LengthMismatch, "evaluate_video: " + std::to_string(maps.size()) + " maps, " +
                                          std::to_string(fixs.size()) + " fixation sets, " +
                                          std::to_string(gts.size()) + " ground-truth maps");
  }
  std::vector<FrameScores> frames(maps.size());
  parallel_for(maps.size(), 1 << 16, [&](std::size_t t) {
    frames[t] = score_frame(maps[t], fixs[t], gts[t], shuffle_pool, mix_seed(seed, t), options);
  });

  VideoEvaluation ev;
  ev.frames = frames.size();
  for (const FrameScores& f : frames) {
    (f.has_fixations ? ev.fixation_frames : ev.skipped_fixation_frames) += 1;
    (f.has_gt_mass ? ev.distribution_frames : ev.skipped_distribution_frames) += 1;
  }
  for (Metric m : options.metrics) {
    double acc = 0.0;
    std::size_t count = 0, undefined = 0;
    for (const FrameScores& f : frames) {
      const bool eligible = fixation_based(m) ? f.has_fixations : f.has_gt_mass;
      if (!eligible) continue;
      if (const auto& v = f.scores[m]) {
        acc += *v;
        ++count;
      } else {
        ++undefined;
      }
    }
    if (count > 0) ev.scores[m] = acc / static_cast<double>(count);
    if (undefined > 0) ev.undefined_frames[std::string(metric_key(m))] = undefined;
  }
  return ev;
}

EvalReport aggregate_report(const std::map<std::string, MetricScores>& per_video,
                            const std::map<std::string, std::vector<std::string>>& grouping) {
  EvalReport report{per_video, grouping, {}};
  for (const auto& [label, members] : grouping) {
    MetricScores avg;
    for (Metric m : kAllMetrics) {
      double acc = 0.0;
      std::size_t count = 0;
      for (const std::string& id : members) {
        auto it = per_video.find(id);
        if (it == per_video.end()) {
          throw Error(Errc::UnknownVideo, "group '" + label + "' references unknown video '" + id + "'");
        }
        if (const auto& v = it->second[m]) {
          acc += *v;
          ++count;
        }
      }
      if (count > 0) avg[m] = acc / static_cast<double>(count);
    }
    report.group_averages[label] = avg;
  }
  return report;
}

}  // namespace tsal
