#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vidattack/dataset_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "vidattack_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd " + workdir().string() + " && " + env + " " + VIDATTACK_CLI + " " + args +
                          " > last.out 2> last.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const std::string kConfig = R"({"schema":1,"dataset":{"path":"ds"},
  "attack":{"optimizer":{"max_iterations":10}},"bench":{"videos":2},"output":"out"})";

void ensure_dataset() {
  static bool done = false;
  if (done) return;
  ASSERT_EQ(run("gen-dataset --out ds --shape 8,8,8,1 --samples 12 --ignored-frames 4"), 0);
  write(workdir() / "cfg.json", kConfig);
  done = true;
}

}  // namespace

TEST(Cli, GenDatasetIsDeterministic) {
  ensure_dataset();
  ASSERT_EQ(run("gen-dataset --out ds2 --shape 8,8,8,1 --samples 12 --ignored-frames 4"), 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(workdir() / "ds")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::vector<std::string> names2;
  for (const auto& e : fs::directory_iterator(workdir() / "ds2")) names2.push_back(e.path().filename().string());
  std::sort(names2.begin(), names2.end());
  EXPECT_EQ(names, names2);
  for (const auto& n : names) EXPECT_EQ(slurp(workdir() / "ds" / n), slurp(workdir() / "ds2" / n)) << n;
  const auto manifest = nlohmann::json::parse(slurp(workdir() / "ds" / "manifest.json"));
  EXPECT_EQ(manifest["samples"].size(), 12u);
}

TEST(Cli, GenDatasetCounts) {
  ASSERT_EQ(run("gen-dataset --out ds20 --shape 4,8,8,1 --classes 2 --samples 20 --ignored-frames 1"), 0);
  std::size_t vbt = 0;
  for (const auto& e : fs::directory_iterator(workdir() / "ds20")) {
    const auto name = e.path().filename().string();
    if (name.rfind("s", 0) == 0 && e.path().extension() == ".vbt") ++vbt;
  }
  EXPECT_EQ(vbt, 20u);
  EXPECT_NE(slurp(workdir() / "last.out").find("accuracy 20/20"), std::string::npos);
}

TEST(Cli, AttackWritesReportAndArtifacts) {
  ensure_dataset();
  ASSERT_EQ(run("attack --config cfg.json --input ds/s001.vbt --label 1 --out a1"), 0) << slurp(workdir() / "last.err");
  const auto report = nlohmann::json::parse(slurp(workdir() / "a1" / "report.json"));
  EXPECT_TRUE(report.contains("config"));
  ASSERT_EQ(report["rows"].size(), 1u);
  for (const char* k : {"id", "success", "queries", "map", "map_masked", "sparsity"}) {
    EXPECT_TRUE(report["rows"][0].contains(k)) << k;
  }
  for (const char* k : {"fr", "mq", "map", "map_masked", "s"}) EXPECT_TRUE(report["summary"].contains(k)) << k;
  EXPECT_EQ(report["rows"][0]["success"], true);
  const auto x_adv = vidattack::load_video((workdir() / "a1" / "x_adv.vbt").string());
  const auto mask = vidattack::load_mask((workdir() / "a1" / "mask.vbt").string());
  EXPECT_EQ(x_adv.shape(), mask.shape());
}

TEST(Cli, AttackIsByteDeterministic) {
  ensure_dataset();
  ASSERT_EQ(run("attack --config cfg.json --input ds/s002.vbt --label 0 --out d1"), 0);
  ASSERT_EQ(run("attack --config cfg.json --input ds/s002.vbt --label 0 --out d2"), 0);
  auto a = nlohmann::json::parse(slurp(workdir() / "d1" / "report.json"));
  auto b = nlohmann::json::parse(slurp(workdir() / "d2" / "report.json"));
  a["config"].erase("output");
  b["config"].erase("output");
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(slurp(workdir() / "d1" / "x_adv.vbt"), slurp(workdir() / "d2" / "x_adv.vbt"));
}

TEST(Cli, ExitCodes) {
  ensure_dataset();
  EXPECT_EQ(run("attack --config cfg.json --input ds/missing.vbt --label 0"), 1);
  write(workdir() / "typo.json", R"({"schema":1,"attack":{"omgea":3}})");
  EXPECT_EQ(run("attack --config typo.json --input ds/s000.vbt --label 0"), 1);
  EXPECT_EQ(run("attack --config cfg.json --input ds/s000.vbt"), 1);
  EXPECT_EQ(run("attack --config cfg.json --input ds/s000.vbt --label 0 --budget 0 --out b0"), 2);
  const auto report = nlohmann::json::parse(slurp(workdir() / "b0" / "report.json"));
  EXPECT_EQ(report["result"]["budget_exhausted"], true);
  EXPECT_EQ(run("attack --config cfg.json --input ds/s000.vbt --label 1"), 2);
}

TEST(Cli, ConfigFromEnvironment) {
  ensure_dataset();
  write(workdir() / "env.json", R"({"schema":1,"dataset":{"path":"ds"},"attack":{"phi":0.3,
    "optimizer":{"max_iterations":5}},"output":"envout"})");
  ASSERT_EQ(run("attack --input ds/s003.vbt --label 1", "VIDATTACK_CONFIG=env.json"), 0);
  const auto report = nlohmann::json::parse(slurp(workdir() / "envout" / "report.json"));
  EXPECT_EQ(report["config"]["attack"]["phi"], 0.3);
  // Flags win over the config file.
  ASSERT_EQ(run("attack --input ds/s003.vbt --label 1 --phi 0.5 --out envflag", "VIDATTACK_CONFIG=env.json"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(workdir() / "envflag" / "report.json"))["config"]["attack"]["phi"], 0.5);
}

TEST(Cli, BenchOutputs) {
  ensure_dataset();
  ASSERT_EQ(run("bench --config cfg.json --out bench1 --jobs 2"), 0) << slurp(workdir() / "last.err");
  const auto j = nlohmann::json::parse(slurp(workdir() / "bench1" / "bench.json"));
  EXPECT_EQ(j["variants"].size(), 3u);
  const double base = j["comparison"]["baseline_mq"].get<double>();
  const double ts = j["variants"]["temporal_spatial"]["summary"]["mq"].get<double>();
  EXPECT_EQ(j["comparison"]["temporal_spatial"]["reduction"].get<double>(), 1.0 - ts / base);
  EXPECT_TRUE(fs::exists(workdir() / "bench1" / "baseline.tsv"));

  ASSERT_EQ(run("bench --config cfg.json --out bench2 --variants temporal --log-queries"), 0);
  const auto single = nlohmann::json::parse(slurp(workdir() / "bench2" / "bench.json"));
  EXPECT_FALSE(single.contains("comparison"));
  EXPECT_GT(single["variants"]["temporal"]["query_breakdown"]["key_frame_share"].get<double>(), 0.0);

  EXPECT_EQ(run("bench --config cfg.json --out bench3 --videos 0"), 1);
  EXPECT_NE(slurp(workdir() / "last.err").find("EmptyBatch"), std::string::npos);
}

TEST(Cli, Saliency) {
  ensure_dataset();
  ASSERT_EQ(run("saliency --input ds/s000.vbt --phi 1 --out sal1"), 0);
  const auto mask = vidattack::load_mask((workdir() / "sal1" / "mask.vbt").string());
  EXPECT_EQ(mask.count(), mask.size());
  const auto maps = vidattack::load_video((workdir() / "sal1" / "saliency.vbt").string());
  EXPECT_EQ(maps.shape().channels, 1u);
  EXPECT_EQ(run("saliency --input ds/s000.vbt --phi 0 --out sal0"), 1);
}

TEST(Cli, SaliencyFindsBrightSquare) {
  const vidattack::Shape s{2, 64, 64, 1};
  vidattack::VideoTensor v(s, 64.0);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t w = 30; w < 38; ++w) {
      for (std::size_t h = 10; h < 18; ++h) v[s.index(t, w, h, 0)] = 224.0;
    }
  }
  vidattack::save_vbt((workdir() / "square.vbt").string(), v);
  ASSERT_EQ(run("saliency --input square.vbt --phi 0.1 --out salsq"), 0);
  const auto mask = vidattack::load_mask((workdir() / "salsq" / "mask.vbt").string());
  std::size_t inside = 0;
  for (std::size_t w = 0; w < 64; ++w) {
    for (std::size_t h = 0; h < 64; ++h) {
      if (mask.at(0, w, h, 0) && w >= 24 && w < 44 && h >= 4 && h < 24) ++inside;
    }
  }
  EXPECT_GE(inside, 328u);  // 80% of 410
}

TEST(Cli, ServeVictimAnswersRequests) {
  ensure_dataset();
  ASSERT_EQ(run("serve-victim --config cfg.json --port 0 --duration 0.2"), 0);
  EXPECT_NE(slurp(workdir() / "last.out").find("listening on http://127.0.0.1:"), std::string::npos);
}
