#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsal/adaptation.hpp"
#include "tsal/dataio.hpp"
#include "tsal/error.hpp"
#include "tsal/metrics.hpp"
#include "tsal/parallel.hpp"
#include "tsal/report.hpp"
#include "tsal/rng.hpp"
#include "tsal/simd/kernels.hpp"
#include "tsal/trainer.hpp"

namespace fs = std::filesystem;

namespace tsal::cli {

namespace {

struct Common {
  std::string config;
  std::size_t threads = num_threads();
  std::string simd = "auto";
};

struct EvaluateArgs {
  std::string manifest, predictions, out, table, model, metrics = "auc_j,s_auc,nss,cc,sim", thresholds = "all";
  std::uint64_t shuffle_seed = 42;
};

struct TrainArgs {
  std::string manifest, variant = "convlstm", ckpt = "model.ckpt", loss_csv;
  std::size_t epochs = 1, clip_length = 16, hidden = kDefaultHiddenChannels, decay_every = 3, max_steps = 0;
  std::uint64_t seed = 0;
  double lr = 1e-5, clip_norm = 10.0;
};

struct PredictArgs {
  std::string manifest, ckpt, out, variant;
};

struct ReportArgs {
  std::vector<std::string> files;
  std::string grouping, metrics, out;
};

struct GenerateArgs {
  std::string out;
  SyntheticConfig config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON file of flag defaults; command-line flags win");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--simd", c.simd, "kernel set: auto|scalar|avx2|neon");
}

void apply_common(const Common& c) {
  set_num_threads(c.threads);
  if (c.simd != "auto") {
    const auto isa = simd::parse_isa(c.simd);
    if (!isa) throw Error(Errc::InvalidArgument, "unknown --simd value '" + c.simd + "'");
    simd::select_isa(*isa);
  }
}

std::vector<Metric> parse_metric_list(const std::string& list) {
  std::vector<Metric> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty()) continue;
    const auto m = parse_metric(item);
    if (!m) throw Error(Errc::InvalidArgument, "unknown metric '" + item + "'");
    if (std::ranges::find(out, *m) == out.end()) out.push_back(*m);
  }
  if (out.empty()) throw Error(Errc::InvalidArgument, "--metrics selects nothing");
  // Keep the table's canonical column order.
  std::vector<Metric> ordered;
  for (Metric m : kAllMetrics)
    if (std::ranges::find(out, m) != out.end()) ordered.push_back(m);
  return ordered;
}

std::map<std::string, std::vector<std::string>> grouping_of(const DatasetManifest& m) {
  std::map<std::string, std::vector<std::string>> g;
  for (const VideoRecord& v : m.videos) g[v.group_label].push_back(v.video_id);
  return g;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(Errc::IoError, "write failed: " + path.string());
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const DatasetManifest m = load_manifest(a.manifest);
  EvalOptions opts;
  opts.metrics = parse_metric_list(a.metrics);
  if (a.thresholds == "all") opts.thresholds = AucThresholds::AllValues;
  else if (a.thresholds == "fixation") opts.thresholds = AucThresholds::FixationValues;
  else throw Error(Errc::InvalidArgument, "--auc-thresholds must be 'all' or 'fixation'");

  std::vector<std::vector<FixationSet>> fixations;
  for (const VideoRecord& v : m.videos)
    fixations.push_back(v.fixation_file.empty() ? std::vector<FixationSet>(v.frames.size())
                                                : load_video_fixations(m, v));

  std::map<std::string, MetricScores> per_video;
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    const VideoRecord& v = m.videos[i];
    std::vector<SaliencyMap> preds;
    for (std::size_t f : v.frames) {
      const fs::path p = fs::path(a.predictions) / v.video_id / frame_file_name(f);
      if (!fs::exists(p))
        throw Error(Errc::MissingPrediction, "video '" + v.video_id + "' frame " + std::to_string(f) + ": " + p.string());
      preds.push_back(resize_bilinear(load_map(p), m.resolution.height, m.resolution.width));
    }
    if (v.gt_map_dir.empty() && v.fixation_file.empty())
      throw Error(Errc::MissingInput, "video '" + v.video_id + "' has neither ground-truth maps nor fixations");
    const auto gts = load_video_ground_truth(m, v);
    FixationSet pool;
    for (std::size_t j = 0; j < m.videos.size(); ++j)
      if (j != i)
        for (const FixationSet& f : fixations[j]) pool.points.insert(pool.points.end(), f.points.begin(), f.points.end());
    const VideoEvaluation e = evaluate_video(preds, fixations[i], gts, pool, mix_seed(a.shuffle_seed, i), opts);
    err << "video " << v.video_id << ": " << e.frames << " frames, " << e.skipped_fixation_frames
        << " without fixations, " << e.skipped_distribution_frames << " without ground-truth mass";
    for (const auto& [metric, n] : e.undefined_frames) err << ", " << metric << " undefined on " << n;
    err << "\n";
    per_video[v.video_id] = e.scores;
  }
  ScoreFile file;
  file.model = a.model.empty() ? fs::path(a.predictions).lexically_normal().filename().string() : a.model;
  if (file.model.empty()) file.model = fs::path(a.predictions).lexically_normal().parent_path().filename().string();
  file.metrics = opts.metrics;
  file.report = aggregate_report(per_video, grouping_of(m));
  if (!a.out.empty()) save_score_file(file, a.out);
  const std::string table = render_report(std::span(&file, 1));
  if (!a.table.empty()) write_text_file(a.table, table);
  out << table;
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream&) {
  const DatasetManifest m = load_manifest(a.manifest);
  const std::vector<TrainingSequence> data = load_training_set(m);
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.clip_length = a.clip_length;
  cfg.seed = a.seed;
  cfg.hyper.lr0 = a.lr;
  cfg.hyper.decay_every = a.decay_every;
  cfg.clip_norm = a.clip_norm;
  cfg.max_steps = a.max_steps;
  cfg.checkpoint_path = a.ckpt;
  const Variant variant = parse_variant(a.variant);
  TrainResult r = train(init_parameters(variant, a.seed, a.hidden), data, cfg);
  save_checkpoint(r.model, r.optimizer, a.ckpt);
  const std::string csv = a.loss_csv.empty() ? a.ckpt + ".loss.csv" : a.loss_csv;
  save_loss_history(csv, r.history);
  out << "trained " << variant_name(variant) << " for " << r.history.size() << " windows; first window loss "
      << r.history.front().loss << ", last " << r.history.back().loss << "\n"
      << "checkpoint " << a.ckpt << "\nloss history " << csv << "\n";
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  const DatasetManifest m = load_manifest(a.manifest);
  const Checkpoint ck = a.variant.empty() ? load_checkpoint(a.ckpt) : load_checkpoint(a.ckpt, parse_variant(a.variant));
  std::size_t written = 0;
  for (const VideoRecord& v : m.videos) {
    if (v.static_map_dir.empty()) throw Error(Errc::MissingInput, "video '" + v.video_id + "' has no static maps");
    if (v.frames.empty()) continue;
    std::vector<Tensor4> frames;
    for (const SaliencyMap& s : load_video_maps(m, v, MapKind::Static)) frames.push_back(to_tensor(s));
    const SequenceForward fwd = forward_sequence(frames, ck.model, CacheMode::Discard);
    const fs::path dir = fs::path(a.out) / v.video_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t t = 0; t < v.frames.size(); ++t) write_map(to_map(fwd.outputs[t]), dir / frame_file_name(v.frames[t]));
    written += v.frames.size();
  }
  out << "wrote " << written << " maps under " << a.out << "\n";
  return 0;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  std::vector<ScoreFile> files;
  for (const std::string& p : a.files) files.push_back(load_score_file(p));
  if (!a.grouping.empty()) {
    const auto g = grouping_of(load_manifest(a.grouping));
    for (ScoreFile& f : files) {
      try {
        regroup(f, g);
      } catch (const Error& e) {
        if (e.code() != Errc::UnknownVideo) throw;
        throw Error(Errc::InconsistentVideos, "score file '" + f.model + "': " + e.what());
      }
    }
  }
  const std::vector<Metric> metrics = a.metrics.empty() ? std::vector<Metric>{} : parse_metric_list(a.metrics);
  const std::string text = render_report(files, metrics);
  if (!a.out.empty()) write_text_file(a.out, text);
  out << text;
  return 0;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream&) {
  const DatasetManifest m = generate_synthetic(a.config, a.out);
  out << "generated " << m.videos.size() << " videos under " << a.out << "\n";
  return 0;
}

// Turns the JSON config into flag tokens placed before the user's own flags,
// so that with take-last semantics the command line wins.
std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingInput, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ParseError, "config " + path.string() + " must be a JSON object");
  std::vector<std::string> tokens;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (it.key() == "config") throw Error(Errc::InvalidArgument, "config files cannot include other configs");
    const auto& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) tokens.push_back(flag);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else {
      tokens.push_back(flag);
      tokens.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  return tokens;
}

std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

void log_resolved(const CLI::App* sub, std::ostream& err) {
  nlohmann::ordered_json j;
  for (const CLI::Option* opt : sub->get_options()) {
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_max() > 1) {
      j[name] = opt->results();
    } else if (opt->get_type_size() == 0) {
      j[name] = opt->count() > 0;
    } else {
      j[name] = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    }
  }
  err << "config " << sub->get_name() << " " << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal saliency adaptation: evaluate, train, predict, report, generate", "tsal"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  Common common;
  EvaluateArgs ev;
  TrainArgs tr;
  PredictArgs pr;
  ReportArgs rp;
  GenerateArgs gen;

  auto* evaluate = app.add_subcommand("evaluate", "score predicted maps against a manifest");
  add_common(evaluate, common);
  evaluate->add_option("--manifest", ev.manifest, "dataset manifest.json")->required();
  evaluate->add_option("--predictions", ev.predictions, "directory of <video_id>/NNNNNN.pgm maps")->required();
  evaluate->add_option("--metrics", ev.metrics, "comma-separated subset of auc_j,s_auc,nss,cc,sim");
  evaluate->add_option("--shuffle-seed", ev.shuffle_seed, "seed of the shuffled-AUC negative subsample");
  evaluate->add_option("--auc-thresholds", ev.thresholds, "ROC thresholds: all|fixation");
  evaluate->add_option("--model", ev.model, "model name stored in the report");
  evaluate->add_option("--out", ev.out, "write the report JSON here");
  evaluate->add_option("--table", ev.table, "also write the text table here");

  auto* train_cmd = app.add_subcommand("train", "train an adaptation model");
  add_common(train_cmd, common);
  train_cmd->add_option("--manifest", tr.manifest, "dataset manifest.json")->required();
  train_cmd->add_option("--variant", tr.variant, "conv|convlstm");
  train_cmd->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--clip-length", tr.clip_length, "frames per BPTT window")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "initialization and shuffling seed");
  train_cmd->add_option("--ckpt", tr.ckpt, "checkpoint path");
  train_cmd->add_option("--loss-csv", tr.loss_csv, "loss history path (default <ckpt>.loss.csv)");
  train_cmd->add_option("--hidden", tr.hidden, "hidden channels")->check(CLI::Range(1, 65535));
  train_cmd->add_option("--lr", tr.lr, "initial learning rate");
  train_cmd->add_option("--decay-every", tr.decay_every, "epochs between x0.1 decays")->check(CLI::PositiveNumber);
  train_cmd->add_option("--clip-norm", tr.clip_norm, "global gradient norm limit (<= 0 disables)");
  train_cmd->add_option("--max-steps", tr.max_steps, "stop after this many windows (0 = no limit)");

  auto* predict = app.add_subcommand("predict", "write refined maps for every static frame");
  add_common(predict, common);
  predict->add_option("--manifest", pr.manifest, "dataset manifest.json")->required();
  predict->add_option("--ckpt", pr.ckpt, "checkpoint path")->required();
  predict->add_option("--out", pr.out, "output directory")->required();
  predict->add_option("--variant", pr.variant, "require this variant: conv|convlstm");

  auto* report = app.add_subcommand("report", "render comparison tables from report JSON files");
  add_common(report, common);
  report->add_option("files", rp.files, "report JSON files, one per model")->required()->expected(1, -1);
  report->add_option("--grouping", rp.grouping, "regroup videos by this manifest's group labels");
  report->add_option("--metrics", rp.metrics, "comma-separated metrics to show");
  report->add_option("--out", rp.out, "also write the table here");

  auto* generate = app.add_subcommand("generate", "write a synthetic drifting-blob dataset");
  add_common(generate, common);
  generate->add_option("--out", gen.out, "output root")->required();
  generate->add_option("--videos", gen.config.videos)->check(CLI::PositiveNumber);
  generate->add_option("--frames", gen.config.frames)->check(CLI::PositiveNumber);
  generate->add_option("--height", gen.config.height);
  generate->add_option("--width", gen.config.width);
  generate->add_option("--seed", gen.config.seed);
  generate->add_option("--lag", gen.config.lag);
  generate->add_option("--noise", gen.config.noise);
  generate->add_option("--speed", gen.config.speed);
  generate->add_option("--fixations", gen.config.fixations_per_frame);

  try {
    std::vector<std::string> args = raw_args;
    if (const std::string cfg = find_config(raw_args); !cfg.empty() && !args.empty()) {
      const auto tokens = config_tokens(cfg);
      args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR " << errc_name(Errc::InvalidArgument) << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "ERROR " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    log_resolved(sub, err);
    apply_common(common);
    if (sub == evaluate) return cmd_evaluate(ev, out, err);
    if (sub == train_cmd) return cmd_train(tr, out, err);
    if (sub == predict) return cmd_predict(pr, out, err);
    if (sub == report) return cmd_report(rp, out, err);
    return cmd_generate(gen, out, err);
  } catch (const Error& e) {
    err << "ERROR " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tsal::cli
