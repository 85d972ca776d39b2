#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "chromseg/checkpoint.hpp"
#include "chromseg/dataset.hpp"

namespace fs = std::filesystem;
using namespace chromseg;

namespace {

fs::path workdir() {
  static const fs::path dir = [] {
    const char* env = std::getenv("CHROMSEG_TMP");
    fs::path d = env ? fs::path(env) : fs::temp_directory_path() / "chromseg_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string p(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(CHROMSEG_BIN) + " " + args + " > " + p("last.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Generated, cleaned and split once; shared by the later cases.
void ensure_pipeline() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("gen --n 100 --seed 4 --library-size 6 --out " + p("g.chrseg")) == 0);
  REQUIRE(run("clean --in " + p("g.chrseg") + " --out " + p("c.chrseg")) == 0);
  REQUIRE(run("split --in " + p("c.chrseg") + " --seed 4 --out " + p("s")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("gen is byte-reproducible and writes a manifest") {
  REQUIRE(run("gen --n 30 --seed 9 --out " + p("a.chrseg")) == 0);
  REQUIRE(run("gen --n 30 --seed 9 --threads 2 --out " + p("b.chrseg")) == 0);
  REQUIRE(run("gen --n 30 --seed 10 --out " + p("x.chrseg")) == 0);
  const auto a = slurp(p("a.chrseg"));
  CHECK(a == slurp(p("b.chrseg")));
  CHECK(a != slurp(p("x.chrseg")));
  CHECK(a.size() == kDatasetHeaderBytes + 30 * 2 * 94 * 93);

  const auto m = nlohmann::json::parse(slurp(p("a.chrseg.manifest.json")));
  CHECK(m["tool_version"].get<std::string>().rfind("chromseg ", 0) == 0);
  CHECK(m["seeds"]["seed"] == 9);
  CHECK(m["config"]["n"] == "30");
  bool found = false;
  for (const auto& o : m["outputs"])
    if (o["path"] == p("a.chrseg")) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(a)));
      CHECK(o["fnv1a64"] == std::string(buf));
      found = true;
    }
  CHECK(found);
}

TEST_CASE("clean and split produce 88x88 partitions of 64/16/20") {
  ensure_pipeline();
  const auto c = read_dataset(p("c.chrseg"));
  REQUIRE(c.size() == 100);
  CHECK(c[0].image.height == 88);
  CHECK(read_dataset(p("s_train.chrseg")).size() == 64);
  CHECK(read_dataset(p("s_val.chrseg")).size() == 16);
  CHECK(read_dataset(p("s_test.chrseg")).size() == 20);
}

TEST_CASE("evaluating the truth against itself scores 1") {
  ensure_pipeline();
  REQUIRE(run("eval --data " + p("s_test.chrseg") + " --pred " + p("s_test.chrseg") + " --out " + p("self.json")) == 0);
  const auto j = nlohmann::json::parse(slurp(p("self.json")));
  for (int c = 0; c < 4; ++c) CHECK(j["iou_global"][c] == 1.0);
  CHECK(j["merged_report"]["merged"] == true);
  CHECK(j["merged_report"]["iou_global"][2].is_null());
}

TEST_CASE("train and eval are reproducible end to end") {
  ensure_pipeline();
  const std::string common = "train --train " + p("s_train.chrseg") + " --val " + p("s_val.chrseg") +
                             " --epochs 1 --base-filters 4 --seed 3 --quiet";
  REQUIRE(run(common + " --out " + p("m1.ckpt")) == 0);
  REQUIRE(run(common + " --out " + p("m2.ckpt")) == 0);
  const auto ck = slurp(p("m1.ckpt"));
  CHECK(ck == slurp(p("m2.ckpt")));
  CHECK(ck.size() == nn::kCheckpointHeaderBytes + 4 * nn::parameter_count({2, 4, 4}));
  CHECK(fs::exists(p("m1.ckpt.history.csv")));
  REQUIRE(run("eval --data " + p("s_test.chrseg") + " --checkpoint " + p("m1.ckpt") + " --out " + p("e1.json")) == 0);
  REQUIRE(run("eval --data " + p("s_test.chrseg") + " --checkpoint " + p("m2.ckpt") + " --out " + p("e2.json")) == 0);
  CHECK(slurp(p("e1.json")) == slurp(p("e2.json")));

  REQUIRE(run(common + " --save-optimizer --out " + p("m3.ckpt")) == 0);
  CHECK(slurp(p("m3.ckpt")).size() == nn::kCheckpointHeaderBytes + 12 * nn::parameter_count({2, 4, 4}));
  REQUIRE(run("render --data " + p("s_test.chrseg") + " --checkpoint " + p("m1.ckpt") + " --count 2 --out " +
              p("render")) == 0);
  CHECK(fs::exists(workdir() / "render" / "sample_0.ppm"));
  CHECK(fs::exists(workdir() / "render" / "sample_1.ppm"));
  CHECK_FALSE(fs::exists(workdir() / "render" / "sample_2.ppm"));
}

TEST_CASE("baselines and histogram reports") {
  ensure_pipeline();
  REQUIRE(run("baseline threshold --train " + p("s_train.chrseg") + " --data " + p("s_test.chrseg") + " --out " +
              p("thr.json")) == 0);
  const auto t = nlohmann::json::parse(slurp(p("thr.json")));
  CHECK(t["merged"] == true);
  CHECK(t["method"] == "threshold");
  CHECK(t["iou_global"][2].is_null());
  REQUIRE(run("baseline geometric --train " + p("s_train.chrseg") + " --data " + p("s_test.chrseg") + " --out " +
              p("geo.json")) == 0);
  const auto g = nlohmann::json::parse(slurp(p("geo.json")));
  CHECK(g["applicable_fraction"].get<double>() >= 0.0);
  CHECK(g["applicable_fraction"].get<double>() <= 1.0);
  REQUIRE(run("hist --data " + p("c.chrseg") + " --out " + p("h.csv")) == 0);
  CHECK(slurp(p("h.csv")).rfind("class,bin,count\n", 0) == 0);
}

TEST_CASE("config files fill in flags, and flags win") {
  std::ofstream(p("gen.cfg")) << "n = 12\nseed = 5\n";
  REQUIRE(run("gen --config " + p("gen.cfg") + " --out " + p("cfg.chrseg")) == 0);
  CHECK(read_dataset(p("cfg.chrseg")).size() == 12);
  REQUIRE(run("gen --config " + p("gen.cfg") + " --n 7 --out " + p("cfg2.chrseg")) == 0);
  CHECK(read_dataset(p("cfg2.chrseg")).size() == 7);
  std::ofstream(p("bad.cfg")) << "bogus = 1\n";
  CHECK(run("gen --config " + p("bad.cfg") + " --out " + p("z")) == 1);
  CHECK(run("gen --config " + p("absent.cfg") + " --out " + p("z")) == 2);
}

TEST_CASE("exit codes") {
  ensure_pipeline();
  CHECK(run("") == 1);
  CHECK(run("gen --n 3") == 1);                     // missing --out
  CHECK(run("gen --n x --out " + p("z")) == 1);     // not a number
  CHECK(run("frobnicate") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("clean --in " + p("missing.chrseg") + " --out " + p("z")) == 2);
  CHECK(run("eval --data " + p("s_test.chrseg") + " --out " + p("z")) == 1);  // neither model nor prediction
  std::ofstream(p("junk.chrseg")) << "not a dataset";
  CHECK(run("clean --in " + p("junk.chrseg") + " --out " + p("z")) == 4);
  CHECK(run("train --train " + p("s_train.chrseg") + " --epochs 3 --base-filters 4 --optimizer sgd --lr 1e30 --quiet --out " +
            p("div.ckpt")) == 3);
  CHECK(run("train --train " + p("s_train.chrseg") + " --class-weights 1,2 --out " + p("z")) == 1);
}
