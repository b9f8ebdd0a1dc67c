#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsal/metrics.hpp"
#include "tsal/tensor.hpp"
#include "tsal/trainer.hpp"

namespace tsal {

// ------------------------------------------------------------------ maps

enum class PgmEncoding { Binary, Ascii };  // P5 / P2

/// 8-bit graymap (maxval 255) scaled to [0, 1].
SaliencyMap decode_pgm(std::span<const std::uint8_t> bytes);
SaliencyMap load_map(const std::filesystem::path& path);

/// Each value v in [0, 1] is stored as floor(v * 255 + 0.5).
std::vector<std::uint8_t> encode_pgm(const SaliencyMap& map, PgmEncoding encoding = PgmEncoding::Binary);
void write_map(const SaliencyMap& map, const std::filesystem::path& path,
               PgmEncoding encoding = PgmEncoding::Binary);

std::uint8_t quantize_byte(double v);

/// Rounds every value to the nearest representable 8-bit level.
SaliencyMap quantize_map(const SaliencyMap& map);

/// Bilinear, pixel-centre aligned. Same-size input is returned unchanged.
SaliencyMap resize_bilinear(const SaliencyMap& map, std::size_t height, std::size_t width);

Tensor4 to_tensor(const SaliencyMap& map);
/// Values are clamped into [0, 1].
SaliencyMap to_map(const Tensor4& t);

// ------------------------------------------------------------- fixations

using FixationTable = std::map<std::size_t, FixationSet>;  // frame index -> points

/// Lines "frame_index,row,col"; blank lines and '#' comments are skipped.
/// Points outside height x width raise OutOfBounds with the line number.
FixationTable parse_fixations(std::string_view text, std::size_t height, std::size_t width);
FixationTable load_fixations(const std::filesystem::path& path, std::size_t height, std::size_t width);
void write_fixations(const FixationTable& table, const std::filesystem::path& path);

/// Sum of unit-mass isotropic Gaussians cut off beyond 3 sigma, divided by
/// its maximum. No fixations gives the zero map.
SaliencyMap blur_fixations(const FixationSet& fix, std::size_t height, std::size_t width, double sigma);

/// 19 px at 640x480, scaled with the resolution.
double default_blur_sigma(std::size_t height, std::size_t width);

// ---------------------------------------------------------------- layout

struct Resolution {
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const Resolution&) const = default;
};

struct VideoRecord {
  std::string video_id;
  std::vector<std::size_t> frames;
  std::string static_map_dir;  // relative to the manifest root; empty = absent
  std::string gt_map_dir;
  std::string fixation_file;
  std::string group_label;     // kFreeViewing or kTaskDriven
};

struct DatasetManifest {
  std::vector<VideoRecord> videos;
  Resolution resolution;
  std::filesystem::path root;  // directory the relative paths resolve against

  const VideoRecord& video(std::string_view id) const;
};

std::string frame_file_name(std::size_t frame);  // "000042.pgm"

DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root);
/// Parses and checks that every referenced file exists (MissingInput).
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

enum class MapKind { Static, GroundTruth };

/// All frames of one video, resized to the manifest resolution.
std::vector<SaliencyMap> load_video_maps(const DatasetManifest& manifest, const VideoRecord& video,
                                         MapKind kind);

/// One FixationSet per manifest frame, rescaled from the native map size to
/// the manifest resolution (rounded half-up).
std::vector<FixationSet> load_video_fixations(const DatasetManifest& manifest, const VideoRecord& video);

/// Ground-truth maps when the video has them, else blurred fixations.
std::vector<SaliencyMap> load_video_ground_truth(const DatasetManifest& manifest, const VideoRecord& video);

std::vector<TrainingSequence> load_training_set(const DatasetManifest& manifest);

// ------------------------------------------------------------- synthetic

struct SyntheticConfig {
  std::size_t videos = 4;
  std::size_t frames = 64;
  std::size_t height = 32;
  std::size_t width = 32;
  std::uint64_t seed = 7;
  std::size_t lag = 1;
  double noise = 0.1;            // std of additive Gaussian noise on static maps
  double speed = 1.0;            // pixels per frame
  double blob_sigma = 0.0;       // 0 = min(height, width) / 10
  std::size_t fixations_per_frame = 4;
};

struct SyntheticVideo {
  std::string id;
  std::string group_label;
  std::vector<SaliencyMap> static_maps;  // already 8-bit quantized
  std::vector<SaliencyMap> gt_maps;
  std::vector<FixationSet> fixations;
};

/// Gaussian blob drifting along a seeded random walk. Static map t is the
/// blob at t plus noise; ground truth t is the clean blob at t + lag.
std::vector<SyntheticVideo> synthesize(const SyntheticConfig& config);

/// Writes <root>/<video>/{static,gt}/NNNNNN.pgm, fixations.csv and
/// <root>/manifest.json, and returns the manifest.
DatasetManifest write_synthetic(std::span<const SyntheticVideo> videos, const std::filesystem::path& root);

std::vector<TrainingSequence> training_sequences(std::span<const SyntheticVideo> videos);

DatasetManifest generate_synthetic(const SyntheticConfig& config, const std::filesystem::path& root);

}  // namespace tsal
