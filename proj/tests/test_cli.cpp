#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "tsal/dataio.hpp"
#include "tsal/report.hpp"
#include "tsal/trainer.hpp"

using namespace tsal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tsal_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path small_dataset(const fs::path& dir, std::size_t videos = 3, std::size_t frames = 12) {
  const fs::path root = dir / "data";
  const Outcome g = run_cli({"generate", "--out", root.string(), "--videos", std::to_string(videos), "--frames",
                             std::to_string(frames), "--height", "12", "--width", "12", "--seed", "5"});
  REQUIRE(g.code == 0);
  return root / "manifest.json";
}

// Copies every video's ground-truth maps into a predictions tree.
fs::path ground_truth_as_predictions(const fs::path& manifest, const fs::path& out) {
  const DatasetManifest m = load_manifest(manifest);
  for (const VideoRecord& v : m.videos) {
    fs::create_directories(out / v.video_id);
    for (std::size_t f : v.frames)
      fs::copy_file(m.root / v.gt_map_dir / frame_file_name(f), out / v.video_id / frame_file_name(f));
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate scores ground truth against itself") {
  const fs::path dir = scratch_dir("self");
  const fs::path manifest = small_dataset(dir);
  const fs::path preds = ground_truth_as_predictions(manifest, dir / "pred");
  const Outcome r = run_cli({"evaluate", "--manifest", manifest.string(), "--predictions", preds.string(), "--out",
                             (dir / "eval.json").string(), "--model", "oracle"});
  REQUIRE(r.code == 0);
  const ScoreFile f = load_score_file(dir / "eval.json");
  CHECK(f.model == "oracle");
  CHECK(f.report.per_video.size() == 3);
  for (const auto& [id, s] : f.report.per_video) {
    CHECK(*s.cc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*s.sim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*s.auc_j > 0.5);
  }
  CHECK(r.out == render_report(std::span(&f, 1)));
  CHECK(r.err.find("config evaluate ") != std::string::npos);

  SUBCASE("report reproduces the evaluate table byte for byte") {
    const Outcome rep = run_cli({"report", (dir / "eval.json").string()});
    REQUIRE(rep.code == 0);
    CHECK(rep.out == r.out);
  }
  SUBCASE("metric selection") {
    const Outcome only = run_cli({"evaluate", "--manifest", manifest.string(), "--predictions", preds.string(),
                                  "--metrics", "nss", "--out", (dir / "nss.json").string()});
    REQUIRE(only.code == 0);
    CHECK(only.out.find("NSS") != std::string::npos);
    CHECK(only.out.find("AUC-J") == std::string::npos);
    const auto j = nlohmann::json::parse(file_text(dir / "nss.json"));
    CHECK(j.at("metrics") == nlohmann::json::array({"nss"}));
  }
  SUBCASE("two score files produce a comparison with markers") {
    const Outcome other = run_cli({"evaluate", "--manifest", manifest.string(), "--predictions", preds.string(),
                                   "--out", (dir / "b.json").string(), "--model", "copy"});
    REQUIRE(other.code == 0);
    const Outcome cmp = run_cli({"report", (dir / "eval.json").string(), (dir / "b.json").string(), "--metrics", "cc"});
    REQUIRE(cmp.code == 0);
    CHECK(cmp.out.rfind("CC\n", 0) == 0);
    CHECK(cmp.out.find('*') != std::string::npos);
  }
}

TEST_CASE("evaluate reports a missing prediction") {
  const fs::path dir = scratch_dir("missing");
  const fs::path manifest = small_dataset(dir);
  const fs::path preds = ground_truth_as_predictions(manifest, dir / "pred");
  fs::remove(preds / "video_001" / frame_file_name(4));
  const Outcome r = run_cli({"evaluate", "--manifest", manifest.string(), "--predictions", preds.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("ERROR MissingPrediction:") != std::string::npos);
  CHECK(r.err.find("video_001") != std::string::npos);
}

TEST_CASE("train writes a checkpoint of the requested variant") {
  const fs::path dir = scratch_dir("train");
  const fs::path manifest = small_dataset(dir, 2, 8);
  auto train_args = [&](const std::string& variant, const fs::path& ckpt) {
    return std::vector<std::string>{"train", "--manifest", manifest.string(), "--variant", variant, "--hidden", "3",
                                    "--clip-length", "4", "--seed", "11", "--ckpt", ckpt.string(), "--lr", "0.01"};
  };
  REQUIRE(run_cli(train_args("conv", dir / "conv.ckpt")).code == 0);
  REQUIRE(run_cli(train_args("convlstm", dir / "lstm.ckpt")).code == 0);
  REQUIRE(run_cli(train_args("convlstm", dir / "lstm2.ckpt")).code == 0);
  const std::string conv = file_text(dir / "conv.ckpt");
  const std::string lstm = file_text(dir / "lstm.ckpt");
  CHECK(conv[6] == 0);
  CHECK(lstm[6] == 1);
  CHECK(lstm == file_text(dir / "lstm2.ckpt"));
  CHECK(file_text(dir / "lstm.ckpt.loss.csv") == file_text(dir / "lstm2.ckpt.loss.csv"));
  CHECK(file_text(dir / "lstm.ckpt.loss.csv").rfind("step,loss\n", 0) == 0);

  SUBCASE("predict checks the variant when asked") {
    const Outcome r = run_cli({"predict", "--manifest", manifest.string(), "--ckpt", (dir / "conv.ckpt").string(),
                               "--out", (dir / "p").string(), "--variant", "convlstm"});
    CHECK(r.code == 1);
    CHECK(r.err.find("ERROR CorruptCheckpoint:") != std::string::npos);
  }
}

TEST_CASE("predict with a zero model writes mid-grey maps") {
  const fs::path dir = scratch_dir("predict");
  const fs::path manifest = small_dataset(dir, 2, 5);
  const AdaptationModel zero = AdaptationModel::zeros(Variant::ConvLstm, 2);
  save_checkpoint(zero, OptimizerState::fresh(zero), dir / "zero.ckpt");
  const Outcome r = run_cli({"predict", "--manifest", manifest.string(), "--ckpt", (dir / "zero.ckpt").string(),
                             "--out", (dir / "pred").string()});
  REQUIRE(r.code == 0);
  std::size_t count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "pred")) {
    if (!entry.is_regular_file()) continue;
    ++count;
    const std::string bytes = file_text(entry.path());
    const SaliencyMap map = decode_pgm(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    CHECK(map.height() == 12);
    for (double v : map.values()) CHECK(quantize_byte(v) == 128);
  }
  CHECK(count == 2 * 5);
}

TEST_CASE("config files supply defaults that flags override") {
  const fs::path dir = scratch_dir("config");
  {
    std::ofstream cfg(dir / "gen.json");
    cfg << R"({"videos": 2, "frames": 3, "height": 10, "width": 14, "seed": 9})";
  }
  const Outcome r = run_cli({"generate", "--config", (dir / "gen.json").string(), "--out", (dir / "d").string(),
                             "--frames", "6"});
  REQUIRE(r.code == 0);
  const DatasetManifest m = load_manifest(dir / "d" / "manifest.json");
  CHECK(m.videos.size() == 2);
  CHECK(m.videos[0].frames.size() == 6);
  CHECK(m.resolution.height == 10);
  CHECK(m.resolution.width == 14);
  CHECK(r.err.find("\"seed\":\"9\"") != std::string::npos);

  SUBCASE("unknown keys are rejected") {
    std::ofstream(dir / "bad.json") << R"({"colour": "blue"})";
    const Outcome bad = run_cli({"generate", "--config", (dir / "bad.json").string(), "--out", (dir / "e").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.rfind("ERROR InvalidArgument:", 0) == 0);
  }
  SUBCASE("malformed JSON") {
    std::ofstream(dir / "broken.json") << "{";
    const Outcome bad = run_cli({"generate", "--config", (dir / "broken.json").string(), "--out", (dir / "e").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.rfind("ERROR ParseError:", 0) == 0);
  }
}

TEST_CASE("argument errors and help") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  const Outcome missing = run_cli({"train"});
  CHECK(missing.code == 2);
  CHECK(missing.err.rfind("ERROR InvalidArgument:", 0) == 0);
  CHECK(run_cli({"evaluate", "--manifest", "m", "--predictions", "p", "--metrics", "bogus"}).code == 1);
  const Outcome simd = run_cli({"generate", "--out", "x", "--simd", "sparc"});
  CHECK(simd.code == 1);
  CHECK(simd.err.find("ERROR InvalidArgument:") != std::string::npos);
  const Outcome help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("evaluate") != std::string::npos);
  const Outcome sub_help = run_cli({"train", "--help"});
  CHECK(sub_help.code == 0);
  CHECK(sub_help.out.find("--clip-length") != std::string::npos);
  const Outcome no_manifest = run_cli({"evaluate", "--manifest", "/nonexistent/manifest.json", "--predictions", "p"});
  CHECK(no_manifest.code == 1);
  CHECK(no_manifest.err.find("ERROR MissingInput:") != std::string::npos);
}
