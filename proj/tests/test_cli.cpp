#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "gridagent/run_config.hpp"

using namespace gridagent;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, std::string* out = nullptr) {
  const auto log = fs::temp_directory_path() / "gridagent_cli_test.log";
  const std::string cmd = std::string(GRIDAGENT_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(log);
    std::ostringstream s;
    s << in.rdbuf();
    *out = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridagent_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run config rejects unknown keys and applies overrides") {
  auto rc = RunConfig::from_values(KeyValueConfig::parse("[training]\nfinetune_epochs = 3\n"));
  CHECK(rc.train.finetune_epochs == 3);
  CHECK(rc.train.pretrain_epochs == 5);
  CHECK(rc.train.finetune_epochs + rc.train.pretrain_epochs != 0);
  CHECK_THROWS_AS(RunConfig::from_values(KeyValueConfig::parse("[training]\nfinetune_epoch = 3\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_values(KeyValueConfig::parse("[mystery]\nx = 1\n")), ConfigError);
  auto kv = KeyValueConfig::parse("[eval]\nn = 30\n");
  kv.apply_overrides({"eval.n=7"});
  CHECK(RunConfig::from_values(kv).eval.n == 7);
}

TEST_CASE("default schedule is 5 pretrain and 10 finetune epochs") {
  const auto rc = RunConfig::from_values(KeyValueConfig{});
  CHECK(rc.train.pretrain_epochs == 5);
  CHECK(rc.train.finetune_epochs == 10);
  CHECK(rc.eval.n == 30);
  CHECK(rc.fingerprint() == RunConfig::from_values(KeyValueConfig{}).fingerprint());
}

TEST_CASE("shipped config file resolves") {
  const auto rc = RunConfig::resolve(fs::path(GRIDAGENT_SOURCE_DIR) / "configs" / "default.ini", {});
  CHECK(rc.graph.recipe_count() == 8);
  CHECK(rc.dataset.n_per_goal == 300);
}

TEST_CASE("play with the expert prints T + 1 frames") {
  std::string out;
  REQUIRE(run("play --seed 0 --task collect_logs --policy expert", &out) == 0);
  int frames = 0;
  for (std::size_t pos = out.find("frame "); pos != std::string::npos; pos = out.find("frame ", pos + 1)) ++frames;
  int actions = 0;
  for (std::size_t pos = out.find("action "); pos != std::string::npos; pos = out.find("action ", pos + 1)) ++actions;
  CHECK(actions >= 1);
  CHECK(frames == actions + 1);
  CHECK(out.find("success") != std::string::npos);
}

TEST_CASE("exit codes: 0 ok, 1 config error") {
  CHECK(run("play --task no_such_task") == 1);
  CHECK(run("eval --policy expert --set eval.bogus=1") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("eval --policy model") == 1);  // missing checkpoint
}

TEST_CASE("gen-data is idempotent and writes a config snapshot; eval emits a report") {
  const auto dir = scratch("gen");
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(run("gen-data --n 3 --goals collect_logs,make_planks --out " + a) == 0);
  REQUIRE(run("gen-data --n 3 --goals collect_logs,make_planks --workers 3 --out " + b) == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(fs::path(a) / "manifest.json") == slurp(fs::path(b) / "manifest.json"));
  CHECK(fs::exists(fs::path(a) / "config.resolved.ini"));
  const std::string e = (dir / "eval").string();
  REQUIRE(run("eval --policy expert --suite atomic --n 1 --out " + e) == 0);
  const auto report = nlohmann::json::parse(slurp(fs::path(e) / "report.json"));
  CHECK(report["atomic"].size() == 4u);
  CHECK(report["atomic"][0]["n"] == 1);
  fs::remove_all(dir);
}

}
