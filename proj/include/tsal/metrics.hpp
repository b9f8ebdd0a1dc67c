#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsal {

/// Single-channel saliency heat map; values are finite and nonnegative.
class SaliencyMap {
 public:
  SaliencyMap(std::size_t height, std::size_t width, double fill = 0.0);
  SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  double at(std::size_t row, std::size_t col) const noexcept { return values_[row * width_ + col]; }

  /// Writes one pixel, validating it like the constructor does.
  void set(std::size_t row, std::size_t col, double value);

  double total() const noexcept;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

struct Fixation {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Fixation&, const Fixation&) = default;
  friend auto operator<=>(const Fixation&, const Fixation&) = default;
};

/// Gaze hits for one frame. Duplicates are kept: each repeated sample counts.
struct FixationSet {
  std::vector<Fixation> points;

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
};

enum class Metric { AucJudd, ShuffledAuc, Nss, Cc, Sim };

inline constexpr std::array<Metric, 5> kAllMetrics{Metric::AucJudd, Metric::ShuffledAuc,
                                                   Metric::Nss, Metric::Cc, Metric::Sim};

/// JSON key: "auc_j", "s_auc", "nss", "cc", "sim".
std::string_view metric_key(Metric m) noexcept;
/// Column label: "AUC-J", "sAUC", "NSS", "CC", "SIM".
std::string_view metric_label(Metric m) noexcept;
/// Accepts either the key or the label, case-insensitively.
std::optional<Metric> parse_metric(std::string_view name);

/// Five scores; std::nullopt marks a score that is undefined for the input.
struct MetricScores {
  std::optional<double> auc_j;
  std::optional<double> s_auc;
  std::optional<double> nss;
  std::optional<double> cc;
  std::optional<double> sim;

  std::optional<double>& operator[](Metric m) noexcept;
  const std::optional<double>& operator[](Metric m) const noexcept;
};

/// Threshold set used by the ROC sweep.
enum class AucThresholds {
  /// Every distinct value among positives and negatives: the exact ROC, whose
  /// area equals the Mann-Whitney statistic (ties count one half).
  AllValues,
  /// Only the distinct positive values, as in the MIT benchmark's AUC-Judd
  /// script. Over-credits negatives that fall between two positives.
  FixationValues,
};

/// Area under the ROC curve built by sweeping thresholds t (descending) with
/// TPR = |pos >= t| / |pos| and FPR = |neg >= t| / |neg|, anchored at (0,0)
/// and (1,1), integrated with the trapezoid rule.
double roc_area(std::span<const double> positives, std::span<const double> negatives,
                AucThresholds thresholds = AucThresholds::AllValues);

/// Mean of the z-scored map at the fixations (population standard deviation).
/// A constant map scores 0.
double nss(const SaliencyMap& map, const FixationSet& fix);

/// Pearson correlation; nullopt when either map is constant.
std::optional<double> cc(const SaliencyMap& map, const SaliencyMap& gt);

/// Histogram intersection of the two maps after normalizing each to unit mass.
double sim(const SaliencyMap& map, const SaliencyMap& gt);

/// Positives are the map values at fixations, negatives every pixel that is
/// not fixated.
double auc_judd(const SaliencyMap& map, const FixationSet& fix,
                AucThresholds thresholds = AucThresholds::AllValues);

/// Negatives are the map values at `other_fix` (fixations from other frames or
/// videos). When there are more than 10x as many as positives, a seeded
/// subsample of exactly 10x is drawn without replacement.
double shuffled_auc(const SaliencyMap& map, const FixationSet& fix, const FixationSet& other_fix,
                    std::uint64_t rng_seed, AucThresholds thresholds = AucThresholds::AllValues);

inline constexpr std::size_t kShuffledNegativesPerPositive = 10;

struct EvalOptions {
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  AucThresholds thresholds = AucThresholds::AllValues;

  bool wants(Metric m) const noexcept;
};

/// Per-video scores and the frame bookkeeping behind them.
struct VideoEvaluation {
  MetricScores scores;
  std::size_t frames = 0;
  /// Frames that entered NSS / AUC-J (at least one fixation).
  std::size_t fixation_frames = 0;
  /// Frames without fixations, excluded from the fixation-based metrics.
  std::size_t skipped_fixation_frames = 0;
  /// Frames that entered CC / SIM (ground truth with positive mass).
  std::size_t distribution_frames = 0;
  std::size_t skipped_distribution_frames = 0;
  /// Frames whose score for a metric was undefined even though the frame was
  /// otherwise eligible (constant map for CC, empty shuffle pool for sAUC...).
  std::map<std::string, std::size_t> undefined_frames;
};

/// Scores every frame independently and averages in frame order. Frame t's
/// shuffled-AUC subsample is seeded from (seed, t), so the result does not
/// depend on how frames are scheduled across threads.
VideoEvaluation evaluate_video(std::span<const SaliencyMap> maps,
                               std::span<const FixationSet> fixs,
                               std::span<const SaliencyMap> gts, const FixationSet& shuffle_pool,
                               std::uint64_t seed, const EvalOptions& options = {});

inline constexpr std::string_view kFreeViewing = "free-viewing";
inline constexpr std::string_view kTaskDriven = "task-driven";

struct EvalReport {
  std::map<std::string, MetricScores> per_video;
  /// Group label -> member video ids, in presentation order.
  std::map<std::string, std::vector<std::string>> groups;
  std::map<std::string, MetricScores> group_averages;
};

/// Unweighted mean of each metric over a group's members (members whose score
/// is undefined are left out; a group with no defined member stays undefined).
EvalReport aggregate_report(const std::map<std::string, MetricScores>& per_video,
                            const std::map<std::string, std::vector<std::string>>& grouping);

}  // namespace tsal
