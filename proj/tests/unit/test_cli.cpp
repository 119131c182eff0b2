#include <algorithm>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "lqe/image_io.hpp"

namespace fs = std::filesystem;
using lqe::testing::read_bytes;
using lqe::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run lqe_run(std::vector<std::string> args) {
  args.insert(args.begin(), "lqe");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lqe::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

fs::path write_tiny_config(const TempDir& dir) {
  lqe::TrainConfig cfg = lqe::testing::tiny_config();
  cfg.epochs = 1;
  const fs::path p = dir / "tiny.cfg";
  lqe::testing::write_text_file(p, lqe::dump_config(cfg));
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(lqe_run({"--help"}).code == 0);
  CHECK(lqe_run({}).code == 2);
  CHECK(lqe_run({"frobnicate"}).code == 2);
  CHECK(lqe_run({"synth", "--classes", "many"}).code == 2);
}

TEST_CASE("qc on an empty directory writes an empty report") {
  TempDir dir("lqe_cli");
  fs::create_directory(dir / "in");
  const Run r = lqe_run({"qc", (dir / "in").string(), "--out", (dir / "qc.csv").string()});
  CHECK(r.code == 0);
  CHECK(lines_of(read_bytes(dir / "qc.csv")).size() == 1);
  CHECK(lqe_run({"qc", (dir / "missing").string(), "--out", (dir / "x.csv").string()}).code == 2);
}

TEST_CASE("qc rejects an all-black image and reruns byte-identically") {
  TempDir dir("lqe_cli");
  fs::create_directory(dir / "in");
  lqe::write_png(dir / "in/black.png", lqe::Image(32, 32, 3, 0.0));
  lqe::write_png(dir / "in/board.png", lqe::testing::checkerboard(32, 0, 255));
  lqe::testing::write_text_file(dir / "in/readme.txt", "not an image");
  const Run r = lqe_run({"qc", (dir / "in").string(), "--out", (dir / "a.csv").string()});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(read_bytes(dir / "a.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].rfind("black.png,", 0) == 0);
  CHECK(rows[1].find(",false,underexposed,") != std::string::npos);
  CHECK(rows[2].find(",true,") != std::string::npos);
  REQUIRE(lqe_run({"qc", (dir / "in").string(), "--out", (dir / "b.csv").string()}).code == 0);
  CHECK(read_bytes(dir / "a.csv") == read_bytes(dir / "b.csv"));
}

TEST_CASE("synth layout and determinism") {
  TempDir dir("lqe_cli");
  auto synth = [&](const std::string& name, const std::string& seed) {
    return lqe_run({"synth", "--out", (dir / name).string(), "--images-per-grade", "20", "--side", "32", "--seed", seed});
  };
  REQUIRE(synth("a", "3").code == 0);
  REQUIRE(synth("b", "3").code == 0);
  REQUIRE(synth("c", "4").code == 0);

  const auto files = files_under(dir / "a");
  CHECK(files.size() == 100);
  for (const char* split : {"train", "val", "test"}) {
    std::vector<std::string> grades;
    for (const auto& e : fs::directory_iterator(dir / "a" / split)) grades.push_back(e.path().filename().string());
    std::sort(grades.begin(), grades.end());
    CHECK(grades == std::vector<std::string>{"0", "1", "2", "3", "4"});
  }
  CHECK(files_under(dir / "b") == files);
  bool all_same = true, any_diff = false;
  for (const auto& f : files) {
    all_same = all_same && read_bytes(dir / "a" / f) == read_bytes(dir / "b" / f.string());
    any_diff = any_diff || read_bytes(dir / "a" / f) != read_bytes(dir / "c" / f.string());
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("train, eval and attn on a tiny run") {
  TempDir dir("lqe_cli");
  const fs::path cfg = write_tiny_config(dir);

  CHECK(lqe_run({"train", "--out", (dir / "run").string()}).code == 2);
  CHECK(lqe_run({"train", "--config", (dir / "nope.cfg").string()}).code == 2);
  CHECK(lqe_run({"train", "--config", cfg.string(), "--set", "lr=-1"}).code == 2);

  const Run tr = lqe_run({"train", "--config", cfg.string(), "--epochs", "1", "--attn-samples", "2", "--out",
                          (dir / "run").string()});
  INFO(tr.err);
  REQUIRE(tr.code == 0);
  CHECK(lines_of(read_bytes(dir / "run/history.csv")).size() == 2);
  for (const char* f : {"manifest.json", "best.ckpt", "last.ckpt", "config.txt", "test_report.json"})
    CHECK(fs::exists(dir / "run" / f));
  int maps = 0;
  for (const auto& e : fs::directory_iterator(dir / "run/artifacts/attn/epoch_1")) maps += e.is_regular_file();
  CHECK(maps == 2 * 4);

  REQUIRE(lqe_run({"synth", "--out", (dir / "data").string(), "--images-per-grade", "4", "--side", "32"}).code == 0);
  const std::string ckpt = (dir / "run/best.ckpt").string();
  const Run ev = lqe_run({"eval", "--checkpoint", ckpt, "--split-dir", (dir / "data/train").string(), "--out",
                          (dir / "eval").string()});
  REQUIRE(ev.code == 0);
  CHECK(fs::exists(dir / "eval/report.json"));
  const std::size_t images = files_under(dir / "data/train").size();
  CHECK(lines_of(read_bytes(dir / "eval/samples.jsonl")).size() == images);
  CHECK(lqe_run({"eval", "--checkpoint", ckpt, "--split-dir", (dir / "none").string()}).code == 2);

  const std::string img = (dir / "data/train/2" / files_under(dir / "data/train/2").front()).string();
  const Run at = lqe_run({"attn", "--checkpoint", ckpt, img, "--out", (dir / "attn1").string()});
  INFO(at.err);
  REQUIRE(at.code == 0);
  REQUIRE(lqe_run({"attn", "--checkpoint", ckpt, img, "--out", (dir / "attn2").string()}).code == 0);
  const auto heat = files_under(dir / "attn1");
  CHECK(heat.size() == 4);
  for (const auto& f : heat) CHECK(read_bytes(dir / "attn1" / f) == read_bytes(dir / "attn2" / f.string()));
  CHECK(lqe_run({"attn", "--checkpoint", ckpt, cfg.string(), "--out", (dir / "attn3").string()}).code == 2);
}

TEST_CASE("ablate axes") {
  TempDir dir("lqe_cli");
  const fs::path cfg = write_tiny_config(dir);
  CHECK(lqe_run({"ablate", "--config", cfg.string(), "--axis", "colour", "--out", (dir / "x").string()}).code == 2);

  REQUIRE(lqe_run({"ablate", "--config", cfg.string(), "--axis", "stage", "--out", (dir / "s").string()}).code == 0);
  CHECK(lines_of(read_bytes(dir / "s/ablation_stage.csv")).size() == 3);

  // With lambda_max = 0 the two annealing variants train identical models.
  REQUIRE(lqe_run({"ablate", "--config", cfg.string(), "--axis", "anneal", "--set", "lambda_max=0", "--out",
                   (dir / "a").string()})
              .code == 0);
  const auto rows = lines_of(read_bytes(dir / "a/ablation_anneal.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].substr(rows[1].find(',', rows[1].find(',') + 1)) ==
        rows[2].substr(rows[2].find(',', rows[2].find(',') + 1)));
}
