#include "tsal/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "tsal/error.hpp"
#include "tsal/rng.hpp"

namespace fs = std::filesystem;

namespace tsal {

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path, Errc missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw Error(Errc::IoError, "write failed: " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Header tokenizer: whitespace separated, '#' starts a comment to end of line.
class PgmCursor {
 public:
  explicit PgmCursor(std::span<const std::uint8_t> b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (is_space(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  // Returns false at end of input.
  bool number(std::uint64_t& out, Errc on_garbage, const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) return false;
    if (b_[pos_] < '0' || b_[pos_] > '9')
      throw Error(on_garbage, std::string("PGM: expected a number for ") + what);
    out = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      out = out * 10 + (b_[pos_] - '0');
      if (out > 0xFFFFFFFFull) throw Error(on_garbage, std::string("PGM: ") + what + " too large");
      ++pos_;
    }
    return true;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::span<const std::uint8_t> rest() const { return b_.subspan(pos_); }
  bool at_end() const { return pos_ >= b_.size(); }
  std::uint8_t peek() const { return b_[pos_]; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

SaliencyMap decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw Error(Errc::BadHeader, "PGM: magic must be P5 or P2");
  const bool binary = bytes[1] == '5';
  PgmCursor cur(bytes);
  cur.advance(2);
  if (cur.at_end() || !is_space(cur.peek())) throw Error(Errc::BadHeader, "PGM: missing whitespace after magic");
  std::uint64_t width = 0, height = 0, maxval = 0;
  if (!cur.number(width, Errc::BadHeader, "width") || !cur.number(height, Errc::BadHeader, "height") ||
      !cur.number(maxval, Errc::BadHeader, "maxval"))
    throw Error(Errc::BadHeader, "PGM: header ends early");
  if (width == 0 || height == 0) throw Error(Errc::BadHeader, "PGM: zero width or height");
  if (maxval == 0 || maxval > 65535) throw Error(Errc::BadHeader, "PGM: maxval out of range");
  if (maxval != 255)
    throw Error(Errc::UnsupportedDepth, "PGM: maxval " + std::to_string(maxval) + " (only 255 is supported)");
  const std::size_t n = static_cast<std::size_t>(width * height);
  std::vector<double> values(n);
  if (binary) {
    if (cur.at_end() || !is_space(cur.peek())) throw Error(Errc::BadHeader, "PGM: missing whitespace after maxval");
    cur.advance(1);
    auto payload = cur.rest();
    if (payload.size() < n)
      throw Error(Errc::TruncatedData, "PGM: " + std::to_string(payload.size()) + " of " + std::to_string(n) +
                                           " pixel bytes present");
    for (std::size_t i = 0; i < n; ++i) values[i] = payload[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      if (!cur.number(v, Errc::TruncatedData, "pixel"))
        throw Error(Errc::TruncatedData, "PGM: " + std::to_string(i) + " of " + std::to_string(n) + " pixels present");
      if (v > 255) throw Error(Errc::OutOfRange, "PGM: pixel value " + std::to_string(v) + " exceeds maxval");
      values[i] = static_cast<double>(v) / 255.0;
    }
  }
  return SaliencyMap(static_cast<std::size_t>(height), static_cast<std::size_t>(width), std::move(values));
}

SaliencyMap load_map(const fs::path& path) {
  const auto bytes = read_file(path, Errc::IoError);
  try {
    return decode_pgm(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::uint8_t quantize_byte(double v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw Error(Errc::OutOfRange, "map value " + std::to_string(v) + " outside [0, 1]");
  return static_cast<std::uint8_t>(std::min(255.0, std::floor(v * 255.0 + 0.5)));
}

std::vector<std::uint8_t> encode_pgm(const SaliencyMap& map, PgmEncoding encoding) {
  const std::string header = std::string(encoding == PgmEncoding::Binary ? "P5" : "P2") + "\n" +
                             std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  if (encoding == PgmEncoding::Binary) {
    for (double v : map.values()) out.push_back(quantize_byte(v));
  } else {
    std::string body;
    for (std::size_t r = 0; r < map.height(); ++r) {
      for (std::size_t c = 0; c < map.width(); ++c) {
        if (c) body += ' ';
        body += std::to_string(quantize_byte(map.at(r, c)));
      }
      body += '\n';
    }
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

void write_map(const SaliencyMap& map, const fs::path& path, PgmEncoding encoding) {
  write_file(path, encode_pgm(map, encoding));
}

SaliencyMap quantize_map(const SaliencyMap& map) {
  std::vector<double> v(map.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = quantize_byte(map.values()[i]) / 255.0;
  return SaliencyMap(map.height(), map.width(), std::move(v));
}

SaliencyMap resize_bilinear(const SaliencyMap& map, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw Error(Errc::InvalidArgument, "resize to an empty map");
  if (height == map.height() && width == map.width()) return map;
  auto axis = [](std::size_t out, std::size_t in, std::size_t i, std::size_t& lo, std::size_t& hi, double& frac) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    frac = s - static_cast<double>(lo);
  };
  std::vector<double> v(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    std::size_t r0, r1;
    double fr;
    axis(height, map.height(), r, r0, r1, fr);
    for (std::size_t c = 0; c < width; ++c) {
      std::size_t c0, c1;
      double fc;
      axis(width, map.width(), c, c0, c1, fc);
      const double top = map.at(r0, c0) * (1.0 - fc) + map.at(r0, c1) * fc;
      const double bottom = map.at(r1, c0) * (1.0 - fc) + map.at(r1, c1) * fc;
      v[r * width + c] = std::max(0.0, top * (1.0 - fr) + bottom * fr);
    }
  }
  return SaliencyMap(height, width, std::move(v));
}

Tensor4 to_tensor(const SaliencyMap& map) {
  return Tensor4({1, 1, map.height(), map.width()}, std::vector<double>(map.values().begin(), map.values().end()));
}

SaliencyMap to_map(const Tensor4& t) {
  if (t.batch() != 1 || t.channels() != 1)
    throw Error(Errc::DimensionMismatch, "to_map: expected a 1x1xHxW tensor, got " + to_string(t.shape()));
  t.require_finite("to_map");
  std::vector<double> v(t.data().begin(), t.data().end());
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return SaliencyMap(t.height(), t.width(), std::move(v));
}

// ------------------------------------------------------------- fixations

FixationTable parse_fixations(std::string_view text, std::size_t height, std::size_t width) {
  FixationTable table;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;

    std::size_t fields[3];
    std::size_t k = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto fail = [&](const std::string& why) {
      throw Error(Errc::ParseError, "fixations line " + std::to_string(line_no) + ": " + why);
    };
    for (; k < 3; ++k) {
      while (p < end && *p == ' ') ++p;
      if (p < end && (*p == '-' || *p == '+')) fail("coordinates must be nonnegative integers");
      auto [next, ec] = std::from_chars(p, end, fields[k]);
      if (ec != std::errc{}) fail("expected an integer in field " + std::to_string(k + 1));
      p = next;
      while (p < end && *p == ' ') ++p;
      if (k < 2) {
        if (p >= end || *p != ',') fail("expected 3 comma-separated fields");
        ++p;
      }
    }
    if (p != end) fail("trailing characters");
    if (fields[1] >= height || fields[2] >= width)
      throw Error(Errc::OutOfBounds, "fixations line " + std::to_string(line_no) + ": (" + std::to_string(fields[1]) +
                                         ", " + std::to_string(fields[2]) + ") outside " + std::to_string(height) +
                                         "x" + std::to_string(width));
    table[fields[0]].points.push_back({fields[1], fields[2]});
  }
  return table;
}

FixationTable load_fixations(const fs::path& path, std::size_t height, std::size_t width) {
  const auto bytes = read_file(path, Errc::IoError);
  try {
    return parse_fixations({reinterpret_cast<const char*>(bytes.data()), bytes.size()}, height, width);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_fixations(const FixationTable& table, const fs::path& path) {
  std::string text = "# frame_index,row,col\n";
  for (const auto& [frame, set] : table)
    for (const Fixation& f : set.points)
      text += std::to_string(frame) + "," + std::to_string(f.row) + "," + std::to_string(f.col) + "\n";
  write_text(path, text);
}

SaliencyMap blur_fixations(const FixationSet& fix, std::size_t height, std::size_t width, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(Errc::InvalidArgument, "blur sigma must be > 0");
  std::vector<double> v(height * width, 0.0);
  const double radius2 = 9.0 * sigma * sigma;
  const auto reach = static_cast<long>(std::floor(3.0 * sigma));
  const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
  for (const Fixation& f : fix.points) {
    if (f.row >= height || f.col >= width) throw Error(Errc::OutOfBounds, "blur_fixations: fixation outside the map");
    const long fr = static_cast<long>(f.row), fc = static_cast<long>(f.col);
    for (long dr = -reach; dr <= reach; ++dr) {
      const long r = fr + dr;
      if (r < 0 || r >= static_cast<long>(height)) continue;
      for (long dc = -reach; dc <= reach; ++dc) {
        const long c = fc + dc;
        if (c < 0 || c >= static_cast<long>(width)) continue;
        const double d2 = static_cast<double>(dr * dr + dc * dc);
        if (d2 > radius2) continue;
        v[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)] +=
            norm * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  const double peak = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  if (peak > 0.0)
    for (double& x : v) x /= peak;
  return SaliencyMap(height, width, std::move(v));
}

double default_blur_sigma(std::size_t height, std::size_t width) {
  return 19.0 * std::sqrt(static_cast<double>(height) * static_cast<double>(width) / (640.0 * 480.0));
}

// ---------------------------------------------------------------- layout

const VideoRecord& DatasetManifest::video(std::string_view id) const {
  for (const VideoRecord& v : videos)
    if (v.video_id == id) return v;
  throw Error(Errc::UnknownVideo, "no video '" + std::string(id) + "' in manifest");
}

std::string frame_file_name(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pgm", frame);
  return buf;
}

namespace {

fs::path frame_path(const DatasetManifest& m, const std::string& dir, std::size_t frame) {
  return m.root / dir / frame_file_name(frame);
}

void check_manifest(const DatasetManifest& m) {
  if (m.videos.empty()) throw Error(Errc::EmptyDataset, "manifest lists no videos");
  if (m.resolution.height == 0 || m.resolution.width == 0)
    throw Error(Errc::InvalidArgument, "manifest resolution must be nonzero");
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    const VideoRecord& v = m.videos[i];
    if (v.video_id.empty()) throw Error(Errc::InvalidArgument, "manifest video with an empty video_id");
    for (std::size_t j = 0; j < i; ++j)
      if (m.videos[j].video_id == v.video_id)
        throw Error(Errc::InvalidArgument, "duplicate video_id '" + v.video_id + "'");
    for (std::size_t k = 1; k < v.frames.size(); ++k)
      if (v.frames[k] <= v.frames[k - 1])
        throw Error(Errc::InvalidArgument, "video '" + v.video_id + "': frame ids must be strictly increasing");
    if (v.group_label != kFreeViewing && v.group_label != kTaskDriven)
      throw Error(Errc::InvalidArgument, "video '" + v.video_id + "': group_label must be '" +
                                             std::string(kFreeViewing) + "' or '" + std::string(kTaskDriven) + "'");
  }
}

}  // namespace

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    const auto& res = j.at("resolution");
    if (!res.is_array() || res.size() != 2) throw Error(Errc::ParseError, "manifest: resolution must be [H, W]");
    m.resolution = {res[0].get<std::size_t>(), res[1].get<std::size_t>()};
    for (const auto& jv : j.at("videos")) {
      VideoRecord v;
      v.video_id = jv.at("video_id").get<std::string>();
      v.frames = jv.at("frames").get<std::vector<std::size_t>>();
      v.static_map_dir = jv.value("static_map_dir", "");
      v.gt_map_dir = jv.value("gt_map_dir", "");
      v.fixation_file = jv.value("fixation_file", "");
      v.group_label = jv.value("group_label", std::string(kFreeViewing));
      m.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest: ") + e.what());
  }
  check_manifest(m);
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  const auto bytes = read_file(path, Errc::MissingInput);
  DatasetManifest m = parse_manifest({reinterpret_cast<const char*>(bytes.data()), bytes.size()},
                                     path.parent_path().empty() ? fs::path(".") : path.parent_path());
  for (const VideoRecord& v : m.videos) {
    for (const std::string* dir : {&v.static_map_dir, &v.gt_map_dir}) {
      if (dir->empty()) continue;
      for (std::size_t f : v.frames)
        if (!fs::exists(frame_path(m, *dir, f)))
          throw Error(Errc::MissingInput, "video '" + v.video_id + "': missing " + frame_path(m, *dir, f).string());
    }
    if (!v.fixation_file.empty() && !fs::exists(m.root / v.fixation_file))
      throw Error(Errc::MissingInput, "video '" + v.video_id + "': missing " + (m.root / v.fixation_file).string());
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["resolution"] = {m.resolution.height, m.resolution.width};
  j["videos"] = nlohmann::ordered_json::array();
  for (const VideoRecord& v : m.videos) {
    nlohmann::ordered_json jv;
    jv["video_id"] = v.video_id;
    jv["frames"] = v.frames;
    jv["static_map_dir"] = v.static_map_dir;
    jv["gt_map_dir"] = v.gt_map_dir;
    jv["fixation_file"] = v.fixation_file;
    jv["group_label"] = v.group_label;
    j["videos"].push_back(std::move(jv));
  }
  return j.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_text(path, manifest_to_json(manifest));
}

std::vector<SaliencyMap> load_video_maps(const DatasetManifest& m, const VideoRecord& v, MapKind kind) {
  const std::string& dir = kind == MapKind::Static ? v.static_map_dir : v.gt_map_dir;
  if (dir.empty())
    throw Error(Errc::MissingInput, "video '" + v.video_id + "' has no " +
                                        (kind == MapKind::Static ? "static_map_dir" : "gt_map_dir"));
  std::vector<SaliencyMap> maps;
  maps.reserve(v.frames.size());
  for (std::size_t f : v.frames) {
    const fs::path p = frame_path(m, dir, f);
    if (!fs::exists(p)) throw Error(Errc::MissingInput, "video '" + v.video_id + "': missing " + p.string());
    maps.push_back(resize_bilinear(load_map(p), m.resolution.height, m.resolution.width));
  }
  return maps;
}

namespace {

Resolution native_resolution(const DatasetManifest& m, const VideoRecord& v) {
  const std::string& dir = v.gt_map_dir.empty() ? v.static_map_dir : v.gt_map_dir;
  if (dir.empty() || v.frames.empty()) return m.resolution;
  const SaliencyMap first = load_map(frame_path(m, dir, v.frames.front()));
  return {first.height(), first.width()};
}

std::size_t rescale_coord(std::size_t x, std::size_t from, std::size_t to) {
  if (from == to) return x;
  const double s = std::floor(static_cast<double>(x) * static_cast<double>(to) / static_cast<double>(from) + 0.5);
  return std::min(static_cast<std::size_t>(s), to - 1);
}

}  // namespace

std::vector<FixationSet> load_video_fixations(const DatasetManifest& m, const VideoRecord& v) {
  if (v.fixation_file.empty()) throw Error(Errc::MissingInput, "video '" + v.video_id + "' has no fixation_file");
  const Resolution native = native_resolution(m, v);
  const FixationTable table = load_fixations(m.root / v.fixation_file, native.height, native.width);
  std::vector<FixationSet> out(v.frames.size());
  for (std::size_t i = 0; i < v.frames.size(); ++i) {
    auto it = table.find(v.frames[i]);
    if (it == table.end()) continue;
    for (const Fixation& f : it->second.points)
      out[i].points.push_back({rescale_coord(f.row, native.height, m.resolution.height),
                               rescale_coord(f.col, native.width, m.resolution.width)});
  }
  return out;
}

std::vector<SaliencyMap> load_video_ground_truth(const DatasetManifest& m, const VideoRecord& v) {
  if (!v.gt_map_dir.empty()) return load_video_maps(m, v, MapKind::GroundTruth);
  const auto fix = load_video_fixations(m, v);
  const double sigma = default_blur_sigma(m.resolution.height, m.resolution.width);
  std::vector<SaliencyMap> out;
  for (const FixationSet& f : fix) out.push_back(blur_fixations(f, m.resolution.height, m.resolution.width, sigma));
  return out;
}

std::vector<TrainingSequence> load_training_set(const DatasetManifest& m) {
  std::vector<TrainingSequence> data;
  for (const VideoRecord& v : m.videos) {
    TrainingSequence seq{v.video_id, {}, {}};
    for (const SaliencyMap& s : load_video_maps(m, v, MapKind::Static)) seq.inputs.push_back(to_tensor(s));
    for (const SaliencyMap& g : load_video_ground_truth(m, v)) seq.targets.push_back(to_tensor(g));
    data.push_back(std::move(seq));
  }
  return data;
}

// ------------------------------------------------------------- synthetic

namespace {

struct Point {
  double y, x;
};

// Heading does a random walk; the blob reflects off a margin of one sigma.
std::vector<Point> blob_path(Rng& rng, std::size_t steps, double h, double w, double sigma, double speed) {
  const double lo_y = std::min(sigma, (h - 1) / 2), hi_y = h - 1 - lo_y;
  const double lo_x = std::min(sigma, (w - 1) / 2), hi_x = w - 1 - lo_x;
  Point p{rng.uniform(lo_y, hi_y), rng.uniform(lo_x, hi_x)};
  double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<Point> path;
  path.reserve(steps);
  auto reflect = [](double v, double lo, double hi, bool& flipped) {
    flipped = false;
    if (hi <= lo) return lo;
    if (v < lo) { v = 2 * lo - v; flipped = true; }
    if (v > hi) { v = 2 * hi - v; flipped = true; }
    return std::clamp(v, lo, hi);
  };
  for (std::size_t t = 0; t < steps; ++t) {
    path.push_back(p);
    heading += 0.3 * rng.normal();
    bool fy, fx;
    p.y = reflect(p.y + speed * std::sin(heading), lo_y, hi_y, fy);
    p.x = reflect(p.x + speed * std::cos(heading), lo_x, hi_x, fx);
    if (fy) heading = -heading;
    if (fx) heading = std::numbers::pi - heading;
  }
  return path;
}

std::vector<double> blob_values(Point c, std::size_t h, std::size_t w, double sigma) {
  std::vector<double> v(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col) {
      const double dy = static_cast<double>(r) - c.y, dx = static_cast<double>(col) - c.x;
      v[r * w + col] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
    }
  return v;
}

SaliencyMap quantized(std::size_t h, std::size_t w, std::vector<double> v) {
  for (double& x : v) x = quantize_byte(std::clamp(x, 0.0, 1.0)) / 255.0;
  return SaliencyMap(h, w, std::move(v));
}

}  // namespace

std::vector<SyntheticVideo> synthesize(const SyntheticConfig& cfg) {
  if (cfg.height < 8 || cfg.width < 8) throw Error(Errc::InvalidArgument, "synthetic maps must be at least 8x8");
  if (cfg.videos == 0 || cfg.frames == 0) throw Error(Errc::InvalidArgument, "synthetic set needs videos and frames");
  if (cfg.noise < 0.0 || cfg.speed < 0.0 || cfg.blob_sigma < 0.0)
    throw Error(Errc::InvalidArgument, "synthetic noise, speed and sigma must be nonnegative");
  const double sigma =
      cfg.blob_sigma > 0.0 ? cfg.blob_sigma : static_cast<double>(std::min(cfg.height, cfg.width)) / 10.0;
  const double h = static_cast<double>(cfg.height), w = static_cast<double>(cfg.width);
  std::vector<SyntheticVideo> out;
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    Rng rng(mix_seed(cfg.seed, v));
    SyntheticVideo video;
    char id[32];
    std::snprintf(id, sizeof id, "video_%03zu", v);
    video.id = id;
    video.group_label = std::string(v % 2 == 0 ? kFreeViewing : kTaskDriven);
    const auto path = blob_path(rng, cfg.frames + cfg.lag, h, w, sigma, cfg.speed);
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      std::vector<double> noisy = blob_values(path[t], cfg.height, cfg.width, sigma);
      if (cfg.noise > 0.0)
        for (double& x : noisy) x += cfg.noise * rng.normal();
      video.static_maps.push_back(quantized(cfg.height, cfg.width, std::move(noisy)));

      const Point target = path[t + cfg.lag];
      video.gt_maps.push_back(quantized(cfg.height, cfg.width, blob_values(target, cfg.height, cfg.width, sigma)));

      FixationSet fix;
      for (std::size_t k = 0; k < cfg.fixations_per_frame; ++k) {
        const double r = std::clamp(std::floor(target.y + sigma * rng.normal() + 0.5), 0.0, h - 1);
        const double c = std::clamp(std::floor(target.x + sigma * rng.normal() + 0.5), 0.0, w - 1);
        fix.points.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
      }
      video.fixations.push_back(std::move(fix));
    }
    out.push_back(std::move(video));
  }
  return out;
}

DatasetManifest write_synthetic(std::span<const SyntheticVideo> videos, const fs::path& root) {
  if (videos.empty()) throw Error(Errc::InvalidArgument, "no synthetic videos to write");
  DatasetManifest m;
  m.root = root;
  m.resolution = {videos.front().static_maps.front().height(), videos.front().static_maps.front().width()};
  std::error_code ec;
  for (const SyntheticVideo& v : videos) {
    const fs::path dir = root / v.id;
    fs::create_directories(dir / "static", ec);
    if (!ec) fs::create_directories(dir / "gt", ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
    VideoRecord rec{v.id, {}, v.id + "/static", v.id + "/gt", v.id + "/fixations.csv", v.group_label};
    FixationTable table;
    for (std::size_t t = 0; t < v.static_maps.size(); ++t) {
      rec.frames.push_back(t);
      write_map(v.static_maps[t], dir / "static" / frame_file_name(t));
      write_map(v.gt_maps[t], dir / "gt" / frame_file_name(t));
      if (!v.fixations[t].empty()) table[t] = v.fixations[t];
    }
    write_fixations(table, dir / "fixations.csv");
    m.videos.push_back(std::move(rec));
  }
  save_manifest(m, root / "manifest.json");
  return m;
}

std::vector<TrainingSequence> training_sequences(std::span<const SyntheticVideo> videos) {
  std::vector<TrainingSequence> data;
  for (const SyntheticVideo& v : videos) {
    TrainingSequence seq{v.id, {}, {}};
    for (const SaliencyMap& s : v.static_maps) seq.inputs.push_back(to_tensor(s));
    for (const SaliencyMap& g : v.gt_maps) seq.targets.push_back(to_tensor(g));
    data.push_back(std::move(seq));
  }
  return data;
}

DatasetManifest generate_synthetic(const SyntheticConfig& config, const fs::path& root) {
  const auto videos = synthesize(config);
  return write_synthetic(videos, root);
}

}  // namespace tsal
