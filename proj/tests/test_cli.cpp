// SPDX-License-Identifier: Apache-2.0
//
// Black-box checks of the command line tool (path injected at build time).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return DMLINK_CLI_PATH; }

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "dmlink_cli_test";
  fs::create_directories(dir);
  return dir;
}

RunResult run(const std::string& args) {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(cli_path()) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_CASE("version and help exit cleanly") {
  CHECK(run("--version").exit_code == 0);
  const RunResult help = run("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("svd-stats") != std::string::npos);
  CHECK(run("mse-sweep --help").exit_code == 0);
}

TEST_CASE("usage errors emit a json line on stderr and exit 2") {
  for (const char* args : {"svd-stats --bogus", "", "train --stage 4 --out x",
                           "not-a-command"}) {
    const RunResult r = run(args);
    CHECK(r.exit_code == 2);
    const auto doc = nlohmann::json::parse(r.err);
    CHECK(doc["error"]["type"] == "usage");
    CHECK(doc["error"]["message"].get<std::string>().size() > 0);
  }
}

TEST_CASE("runtime errors emit a json line on stderr and exit 1") {
  const RunResult r =
      run("e2e-eval --codec1 /does/not/exist.json --codec3 /nor/this.json");
  CHECK(r.exit_code == 1);
  const auto doc = nlohmann::json::parse(r.err);
  CHECK(doc["error"]["type"] == "runtime");
}

TEST_CASE("fixed seeds give byte-identical outputs") {
  const fs::path dir = scratch_dir();
  const fs::path a = dir / "a.json", b = dir / "b.json", c = dir / "c.json";
  const std::string base = "svd-stats --samples 5000 --hist-bins 16 ";
  CHECK(run(base + "--seed 5 --out " + a.string()).exit_code == 0);
  CHECK(run(base + "--seed 5 --out " + b.string()).exit_code == 0);
  CHECK(run(base + "--seed 6 --out " + c.string()).exit_code == 0);
  const std::string text_a = slurp(a);
  CHECK(text_a == slurp(b));
  CHECK(text_a != slurp(c));
  CHECK(nlohmann::json::parse(text_a)["samples"] == 5000);
}

TEST_CASE("sweep writes the metrics csv and sampler trace") {
  const fs::path dir = scratch_dir();
  const fs::path csv = dir / "sweep.csv", trace = dir / "trace.csv";
  const RunResult r =
      run("mse-sweep --trials 20 --snr 0,10 --block-len 8 --seed 3 --out " +
          csv.string() + " --trace-out " + trace.string());
  REQUIRE(r.exit_code == 0);

  const std::string text = slurp(csv);
  CHECK(text.find("# tool=dmlink version=") == 0);
  CHECK(text.find("snr_db,mse_eq_1") != std::string::npos);
  CHECK(r.out.find("mse-sweep: snr_db=0") != std::string::npos);

  const std::string tr = slurp(trace);
  CHECK(tr.find("t,subchannel,branch,row_norm") != std::string::npos);
  CHECK(tr.find("noise_add") != std::string::npos);
  CHECK(tr.find("reverse") != std::string::npos);
}

TEST_CASE("config files feed subcommands and flags override them") {
  const fs::path dir = scratch_dir();
  const fs::path ini = dir / "cfg.ini";
  {
    std::ofstream f(ini);
    f << "[svd-stats]\nsamples=4000\nseed=9\n";
  }
  const fs::path a = dir / "cfg_a.json", b = dir / "cfg_b.json";
  CHECK(run("svd-stats --config " + ini.string() + " --out " + a.string())
            .exit_code == 0);
  CHECK(run("svd-stats --config " + ini.string() + " --samples 2000 --out " +
            b.string())
            .exit_code == 0);
  CHECK(nlohmann::json::parse(slurp(a))["samples"] == 4000);
  CHECK(nlohmann::json::parse(slurp(a))["seed"] == 9);
  CHECK(nlohmann::json::parse(slurp(b))["samples"] == 2000);
}

TEST_CASE("training stages chain through checkpoints") {
  const fs::path dir = scratch_dir();
  const fs::path c1 = dir / "c1.json", p2 = dir / "p2.json",
                 c3 = dir / "c3.json", e2e = dir / "e2e.csv";

  const std::string small =
      " --source-dim 16 --block-len 4 --train-set 96 --holdout-set 48"
      " --batch 32 --seed 4";
  CHECK(run("train --stage 1 --epochs 6" + small + " --out " + c1.string())
            .exit_code == 0);
  CHECK(run("train --stage 2 --epochs 2 --hidden 24" + small + " --codec " +
            c1.string() + " --out " + p2.string())
            .exit_code == 0);
  CHECK(run("train --stage 3 --epochs 2 --predictor oracle" + small +
            " --codec " + c1.string() + " --out " + c3.string())
            .exit_code == 0);
  CHECK(run("e2e-eval --trials 10 --snr 0 --seed 4 --codec1 " + c1.string() +
            " --codec3 " + c3.string() + " --out " + e2e.string())
            .exit_code == 0);
  CHECK(run("mse-sweep --trials 4 --snr 5 --block-len 4 --predictor " +
            p2.string())
            .exit_code == 0);

  CHECK(slurp(e2e).find("mse_eq_dec1,mse_dm_dec1,mse_dm_dec3") !=
        std::string::npos);

  // Stage 3 must refuse a predictor whose shape does not match the codec.
  const fs::path c1_wide = dir / "c1_wide.json";
  CHECK(run("train --stage 1 --epochs 2 --source-dim 16 --block-len 8"
            " --train-set 32 --holdout-set 16 --batch 16 --seed 4 --out " +
            c1_wide.string())
            .exit_code == 0);
  const RunResult bad =
      run("train --stage 3 --epochs 1 --source-dim 16 --block-len 8"
          " --train-set 32 --holdout-set 16 --batch 16 --seed 4 --codec " +
          c1_wide.string() + " --predictor " + p2.string() + " --out " +
          (dir / "bad.json").string());
  CHECK(bad.exit_code == 1);
  CHECK(nlohmann::json::parse(bad.err)["error"]["type"] == "runtime");
}
