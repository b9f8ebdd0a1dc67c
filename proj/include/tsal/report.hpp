#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsal/metrics.hpp"

namespace tsal {

/// One model's evaluation as stored on disk.
struct ScoreFile {
  std::string model;
  std::vector<Metric> metrics;  // columns that were computed
  EvalReport report;
};

std::string score_file_to_json(const ScoreFile& file);
ScoreFile score_file_from_json(std::string_view json_text);
void save_score_file(const ScoreFile& file, const std::filesystem::path& path);
ScoreFile load_score_file(const std::filesystem::path& path);

/// Three decimals, rounding half away from zero on the shortest decimal
/// form of the value, so 2.6525 prints as "2.653". Undefined prints "-".
std::string format_score(std::optional<double> value);

/// Video rows and an AVERAGE row per group, one column per metric.
std::string render_evaluation_table(const ScoreFile& file);

/// Model x video matrix for one metric, one block per group with an AVERAGE
/// column. With two or more models the best value in each column carries a
/// trailing '*'.
std::string render_comparison(std::span<const ScoreFile> files, Metric metric);

/// Replaces every file's grouping (and group averages) with `grouping`.
/// Throws UnknownVideo when a grouped video has no scores.
void regroup(ScoreFile& file, const std::map<std::string, std::vector<std::string>>& grouping);

/// Throws InconsistentVideos unless all files cover the same videos with the
/// same grouping.
void check_consistent(std::span<const ScoreFile> files);

/// One file: its evaluation table. Several: a comparison block per metric
/// present in every file (or per requested metric).
std::string render_report(std::span<const ScoreFile> files, std::span<const Metric> metrics = {});

}  // namespace tsal
