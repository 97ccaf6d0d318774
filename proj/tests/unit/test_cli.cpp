// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(MARBLE_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "marble_test_cli";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("generate, train and eval on the los scene") {
  const fs::path dir = scratch();
  const std::string data = (dir / "data").string();
  const std::string ckpt = (dir / "model.ckpt").string();

  auto r = run("generate --scene los --count 60 --seed 3 --desk-scale --out " + data);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "records.bin"));

  r = run("train --data " + data + " --model marble --mode adaptive --seed 1 --epochs 2,1,1 --batch 16 --out " +
          ckpt + " --report " + (dir / "train.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(ckpt));
  CHECK(slurp(dir / "train.csv").rfind("stage,epoch,train_loss,val_loss", 0) == 0);

  r = run("eval --data " + data + " --ckpt " + ckpt + " --report " + (dir / "m.csv").string() + " --cdf " +
          (dir / "cdf.csv").string() + " --grid " + (dir / "grid.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const std::string metrics = slurp(dir / "m.csv");
  CHECK(metrics.rfind("method,scene,power_dbm,loc_rmse_m,angle_rmse_deg,range_rmse_m\n", 0) == 0);
  CHECK(metrics.find(",los,") != std::string::npos);
  CHECK(slurp(dir / "cdf.csv").rfind("error_m,fraction", 0) == 0);
  CHECK(slurp(dir / "grid.csv").rfind("x_m,y_m,mean_err_m,count", 0) == 0);

  r = run("eval --data " + data + " --knn 5 --report " + (dir / "knn.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const std::string knn = slurp(dir / "knn.csv");
  for (const char* name : {"loc_rmse_m", "angle_rmse_deg", "range_rmse_m"}) CHECK(knn.find(name) != std::string::npos);

  r = run("bench --data " + data + " --ckpt " + ckpt + " --knn 5 --warmup 1 --report " + (dir / "bench.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(dir / "bench.csv").rfind("method,mean_ms,p50_ms,p99_ms", 0) == 0);

  r = run("beam-pattern --ckpt " + ckpt + " --freqs 28e9,28.1e9 --out " + (dir / "beam.csv").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::file_size(dir / "beam.csv") > 0);
  fs::remove_all(dir);
}

TEST_CASE("errors exit nonzero with a diagnostic") {
  const fs::path dir = scratch();
  auto r = run("generate --scene warehouse --count 5 --seed 1 --out " + (dir / "x").string());
  CHECK(r.code != 0);
  CHECK(r.output.find("warehouse") != std::string::npos);

  r = run("eval --data " + (dir / "missing").string() + " --knn 5 --report " + (dir / "m.csv").string());
  CHECK(r.code != 0);
  CHECK(r.output.find("missing") != std::string::npos);

  r = run("train --data " + (dir / "missing").string() + " --model transformer --out " + (dir / "c").string());
  CHECK(r.code != 0);
  CHECK(r.output.find("transformer") != std::string::npos);
  fs::remove_all(dir);
}
