// Copyright 2026 The clipbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clipbench/cli.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace clipbench;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("clipbench_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kBanditEnv =
    R"({"vocab_size":8,"horizon":1,"num_prompts":1,"verifier":{"kind":"target_sequence","match_lengths":[1],"targets":[[3]]}})";

}  // namespace

TEST_CASE("ranges subcommand") {
  const auto r = cli({"ranges", "--delta", "0.07"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("(0.671)") != std::string::npos);
  CHECK(r.out.find("(1.422)") != std::string::npos);
  CHECK(r.out.find("lambert") != std::string::npos);
  const auto j = cli({"ranges", "--delta", "1e-14", "--format", "json"});
  CHECK(j.code == kExitOk);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc.at("path") == "small_delta");
  CHECK(doc.at("lower").get<double>() < 1.0);
  CHECK(cli({"ranges", "--delta", "-1"}).code == kExitConfigError);
  CHECK(cli({"ranges", "--delta", "1000"}).code == kExitConfigError);
  CHECK(cli({"ranges"}).code == kExitConfigError);
  CHECK(cli({"ranges", "--delta", "0.1", "--format", "xml"}).code == kExitConfigError);
}

TEST_CASE("usage errors and help") {
  CHECK(cli({}).code == kExitConfigError);
  CHECK(cli({"nonsense"}).code == kExitConfigError);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"verify", "--which", "t9"}).code == kExitConfigError);
}

TEST_CASE("verify subcommand") {
  const auto dir = scratch("verify");
  const auto r = cli({"verify", "--which", "t2", "--out", (dir / "t2.json").string()});
  CHECK(r.code == kExitOk);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc.size() == 1);
  CHECK(doc[0].at("pass") == true);
  std::ifstream is(dir / "t2.json");
  CHECK(nlohmann::json::parse(is) == doc);
  fs::remove_all(dir);
}

TEST_CASE("train, report and config errors") {
  const auto dir = scratch("train");
  write(dir / "run.json", std::string(R"({"name":"b","env":)") + kBanditEnv +
                              R"(,"train":{"steps":30,"seed":2},"eval":{"every":10}})");
  const auto r = cli({"train", "--config", (dir / "run.json").string(), "--out", (dir / "run").string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  const auto rep = cli({"report", (dir / "run").string(), "--out", (dir / "rep").string(), "--smooth-window", "5"});
  CHECK(rep.code == kExitOk);
  CHECK(fs::exists(dir / "rep" / "return.svg"));
  CHECK(cli({"report", (dir / "nowhere").string(), "--out", (dir / "rep2").string()}).code == kExitConfigError);

  write(dir / "bad.json", std::string(R"({"name":"b","env":)") + kBanditEnv + R"(,"train":{"stepz":3}})");
  CHECK(cli({"train", "--config", (dir / "bad.json").string(), "--out", (dir / "x").string()}).code ==
        kExitConfigError);
  CHECK(cli({"train", "--config", (dir / "absent.json").string(), "--out", (dir / "x").string()}).code ==
        kExitConfigError);
  write(dir / "nan.json", "{not json");
  CHECK(cli({"train", "--config", (dir / "nan.json").string(), "--out", (dir / "x").string()}).code ==
        kExitConfigError);

  write(dir / "boom.json", std::string(R"({"name":"b","env":)") + kBanditEnv +
                               R"(,"train":{"steps":20,"learning_rate":1e308,"inner_steps":2,"advantage_mode":"z_score"}})");
  const auto boom = cli({"train", "--config", (dir / "boom.json").string(), "--out", (dir / "boom").string()});
  CHECK(boom.code == kExitTrainingError);
  CHECK(fs::exists(dir / "boom" / "diagnostics.json"));
  fs::remove_all(dir);
}

TEST_CASE("sweep subcommand") {
  const auto dir = scratch("sweep");
  write(dir / "sweep.json", std::string(R"({"seeds":[0,1],"runs":[{"name":"r","env":)") + kBanditEnv +
                                R"(,"train":{"steps":20},"eval":{"every":10}},{"name":"k","env":)" + kBanditEnv +
                                R"(,"train":{"steps":20,"rule":{"kind":"kl3","params":{"delta":0.07}}},"eval":{"every":10}}]})");
  const auto r = cli({"sweep", "--config", (dir / "sweep.json").string(), "--out", (dir / "out").string(), "--jobs", "2"});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "out" / "k" / "seed_1" / "metrics.csv"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
  write(dir / "extra.json", R"({"runs":[],"colour":1})");
  CHECK(cli({"sweep", "--config", (dir / "extra.json").string(), "--out", (dir / "o2").string()}).code ==
        kExitConfigError);
  fs::remove_all(dir);
}

#ifdef CLIPBENCH_CLI_PATH
TEST_CASE("installed binary exit codes") {
  auto run = [](const std::string& args) {
    const std::string cmd = std::string("\"") + CLIPBENCH_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(run("ranges --delta 0.07") == 0);
  CHECK(run("ranges --delta -3") == 2);
  CHECK(run("bogus") == 2);
}
#endif
