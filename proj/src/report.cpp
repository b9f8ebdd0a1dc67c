#include "tsal/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tsal/error.hpp"

namespace tsal {

using ojson = nlohmann::ordered_json;

namespace {

ojson scores_to_json(const MetricScores& s, std::span<const Metric> metrics) {
  ojson j = ojson::object();
  for (Metric m : metrics) {
    const auto& v = s[m];
    j[std::string(metric_key(m))] = v ? ojson(*v) : ojson(nullptr);
  }
  return j;
}

MetricScores scores_from_json(const ojson& j) {
  MetricScores s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto m = parse_metric(it.key());
    if (!m) throw Error(Errc::ParseError, "score file: unknown metric '" + it.key() + "'");
    if (!it.value().is_null()) s[*m] = it.value().get<double>();
  }
  return s;
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

// Rows of cells; first column left aligned, the rest right aligned.
std::string layout(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) line += "  ";
      line += c == 0 ? pad_right(r[c], width[c]) : pad_left(r[c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

const MetricScores& scores_of(const EvalReport& r, const std::string& video) {
  auto it = r.per_video.find(video);
  if (it == r.per_video.end()) throw Error(Errc::UnknownVideo, "no scores for video '" + video + "'");
  return it->second;
}

MetricScores average_of(const EvalReport& r, const std::string& group) {
  auto it = r.group_averages.find(group);
  return it == r.group_averages.end() ? MetricScores{} : it->second;
}

}  // namespace

std::string score_file_to_json(const ScoreFile& f) {
  ojson j;
  j["model"] = f.model;
  j["metrics"] = ojson::array();
  for (Metric m : f.metrics) j["metrics"].push_back(std::string(metric_key(m)));
  j["videos"] = ojson::array();
  for (const auto& [id, s] : f.report.per_video) {
    ojson v;
    v["video_id"] = id;
    v["scores"] = scores_to_json(s, f.metrics);
    j["videos"].push_back(std::move(v));
  }
  j["groups"] = ojson::array();
  for (const auto& [label, members] : f.report.groups) {
    ojson g;
    g["label"] = label;
    g["videos"] = members;
    g["average"] = scores_to_json(average_of(f.report, label), f.metrics);
    j["groups"].push_back(std::move(g));
  }
  return j.dump(2) + "\n";
}

ScoreFile score_file_from_json(std::string_view text) {
  ScoreFile f;
  try {
    const ojson j = ojson::parse(text);
    f.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("metrics")) {
      const auto parsed = parse_metric(m.get<std::string>());
      if (!parsed) throw Error(Errc::ParseError, "score file: unknown metric '" + m.get<std::string>() + "'");
      f.metrics.push_back(*parsed);
    }
    for (const auto& v : j.at("videos"))
      f.report.per_video[v.at("video_id").get<std::string>()] = scores_from_json(v.at("scores"));
    for (const auto& g : j.at("groups")) {
      const std::string label = g.at("label").get<std::string>();
      f.report.groups[label] = g.at("videos").get<std::vector<std::string>>();
      f.report.group_averages[label] = scores_from_json(g.at("average"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("score file: ") + e.what());
  }
  return f;
}

void save_score_file(const ScoreFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << score_file_to_json(file);
  if (!out.flush()) throw Error(Errc::IoError, "write failed: " + path.string());
}

ScoreFile load_score_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingInput, "cannot open score file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return score_file_from_json(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_score(std::optional<double> value) {
  if (!value) return "-";
  if (!std::isfinite(*value)) return std::isnan(*value) ? "nan" : (*value > 0 ? "inf" : "-inf");
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, std::abs(*value), std::chars_format::fixed);
  std::string digits(buf, res.ptr);
  std::size_t dot = digits.find('.');
  if (dot == std::string::npos) {
    dot = digits.size();
    digits += '.';
  }
  digits.append(4, '0');
  // Keep three decimals, then carry if the fourth digit is 5 or more.
  std::string kept = digits.substr(0, dot + 4);
  if (digits[dot + 4] >= '5') {
    std::size_t i = kept.size();
    bool carry = true;
    while (carry && i-- > 0) {
      if (kept[i] == '.') continue;
      if (kept[i] == '9') {
        kept[i] = '0';
      } else {
        ++kept[i];
        carry = false;
      }
    }
    if (carry) kept.insert(kept.begin(), '1');
  }
  const bool zero = kept.find_first_not_of("0.") == std::string::npos;
  return (*value < 0 && !zero ? "-" : "") + kept;
}

std::string render_evaluation_table(const ScoreFile& f) {
  std::string out = "model: " + f.model + "\n";
  bool first = true;
  for (const auto& [label, members] : f.report.groups) {
    if (!first) out += "\n";
    first = false;
    out += "[" + label + "]\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"video"};
    for (Metric m : f.metrics) header.emplace_back(metric_label(m));
    rows.push_back(header);
    for (const std::string& id : members) {
      std::vector<std::string> row{id};
      const MetricScores& s = scores_of(f.report, id);
      for (Metric m : f.metrics) row.push_back(format_score(s[m]));
      rows.push_back(std::move(row));
    }
    std::vector<std::string> avg{"AVERAGE"};
    const MetricScores a = average_of(f.report, label);
    for (Metric m : f.metrics) avg.push_back(format_score(a[m]));
    rows.push_back(std::move(avg));
    out += layout(rows);
  }
  return out;
}

std::string render_comparison(std::span<const ScoreFile> files, Metric metric) {
  if (files.empty()) throw Error(Errc::InvalidArgument, "nothing to compare");
  check_consistent(files);
  const bool mark = files.size() >= 2;
  std::string out = std::string(metric_label(metric)) + "\n";
  for (const auto& [label, members] : files.front().report.groups) {
    out += "[" + label + "]\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"model"};
    header.insert(header.end(), members.begin(), members.end());
    header.emplace_back("AVERAGE");
    rows.push_back(header);

    // values[model][column]
    std::vector<std::vector<std::optional<double>>> values;
    for (const ScoreFile& f : files) {
      std::vector<std::optional<double>> v;
      for (const std::string& id : members) v.push_back(scores_of(f.report, id)[metric]);
      v.push_back(average_of(f.report, label)[metric]);
      values.push_back(std::move(v));
    }
    const std::size_t cols = members.size() + 1;
    std::vector<std::optional<double>> best(cols);
    for (const auto& v : values)
      for (std::size_t c = 0; c < cols; ++c)
        if (v[c] && (!best[c] || *v[c] > *best[c])) best[c] = v[c];

    for (std::size_t m = 0; m < files.size(); ++m) {
      std::vector<std::string> row{files[m].model};
      for (std::size_t c = 0; c < cols; ++c) {
        std::string cell = format_score(values[m][c]);
        if (mark) cell += values[m][c] && best[c] && *values[m][c] == *best[c] ? "*" : " ";
        row.push_back(std::move(cell));
      }
      rows.push_back(std::move(row));
    }
    out += layout(rows);
  }
  return out;
}

void regroup(ScoreFile& file, const std::map<std::string, std::vector<std::string>>& grouping) {
  file.report = aggregate_report(file.report.per_video, grouping);
}

void check_consistent(std::span<const ScoreFile> files) {
  if (files.empty()) return;
  const ScoreFile& ref = files.front();
  std::set<std::string> ids;
  for (const auto& [id, s] : ref.report.per_video) ids.insert(id);
  for (const ScoreFile& f : files.subspan(1)) {
    std::set<std::string> other;
    for (const auto& [id, s] : f.report.per_video) other.insert(id);
    if (other != ids)
      throw Error(Errc::InconsistentVideos, "score files '" + ref.model + "' and '" + f.model +
                                                "' cover different videos");
    if (f.report.groups != ref.report.groups)
      throw Error(Errc::InconsistentVideos, "score files '" + ref.model + "' and '" + f.model +
                                                "' group their videos differently");
  }
}

std::string render_report(std::span<const ScoreFile> files, std::span<const Metric> metrics) {
  if (files.empty()) throw Error(Errc::InvalidArgument, "no score files to report");
  auto wanted = [&](Metric m) { return metrics.empty() || std::ranges::find(metrics, m) != metrics.end(); };
  if (files.size() == 1) {
    ScoreFile f = files.front();
    std::vector<Metric> keep;
    for (Metric m : f.metrics)
      if (wanted(m)) keep.push_back(m);
    f.metrics = keep;
    return render_evaluation_table(f);
  }
  check_consistent(files);
  std::string out;
  for (Metric m : kAllMetrics) {
    if (!wanted(m)) continue;
    const bool everywhere = std::ranges::all_of(
        files, [&](const ScoreFile& f) { return std::ranges::find(f.metrics, m) != f.metrics.end(); });
    if (!everywhere) continue;
    if (!out.empty()) out += "\n";
    out += render_comparison(files, m);
  }
  return out;
}

}  // namespace tsal
