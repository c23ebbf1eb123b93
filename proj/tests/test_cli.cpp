// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "riswsr/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "riswsr_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(RISWSR_CLI) + " " + args + " > " + (kWork / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = kWork / name;
  riswsr::io::write_text(p, text);
  return p;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

const char* kTiny = R"({
  "seed": 3,
  "geometry": {"ris_rows": 6, "ris_cols": 6},
  "dataset": {"train": 8, "test": 4},
  "network": {"q": 4, "hidden_layers": 1},
  "train": {"epochs": 2, "batch_size": 4, "learning_rate": 0.003}
})";

}  // namespace

TEST_F(Cli, ValidateSucceeds) {
  const fs::path cfg = write_config("empty.json", "{}");
  EXPECT_EQ(run("validate --config " + cfg.string() + " --out " + (kWork / "v").string()), 0);
  EXPECT_TRUE(fs::exists(kWork / "v" / "config.json"));
  EXPECT_FALSE(fs::exists(kWork / "v" / "INCOMPLETE"));
  const json j = json::parse(riswsr::io::read_text(kWork / "v" / "validate.json"));
  EXPECT_TRUE(j.at("passed").get<bool>());
}

TEST_F(Cli, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(run("frobnicate --config x"), 2);
  EXPECT_EQ(run("train"), 2);
  const fs::path bad = write_config("bad.json", R"({"fo": 1})");
  EXPECT_EQ(run("train --config " + bad.string() + " --out " + (kWork / "bad").string()), 2);
  EXPECT_NE(riswsr::io::read_text(kWork / "log.txt").find("unknown key 'fo'"), std::string::npos);
  EXPECT_EQ(run("train --config " + (kWork / "missing.json").string()), 2);
}

TEST_F(Cli, RuntimeFailureLeavesMarker) {
  const fs::path cfg = write_config(
      "nods.json", R"({"dataset": {"path": ")" + (kWork / "nowhere").string() + R"("}})");
  EXPECT_EQ(run("baselines --config " + cfg.string() + " --out " + (kWork / "fail").string()), 1);
  EXPECT_TRUE(fs::exists(kWork / "fail" / "INCOMPLETE"));
}

TEST_F(Cli, GenerateTrainEvaluateBaselines) {
  const fs::path cfg = write_config("tiny.json", kTiny);
  const fs::path data = kWork / "data";
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + data.string()), 0);
  ASSERT_TRUE(fs::exists(data / "train" / "manifest.json"));

  json j = json::parse(kTiny);
  j["dataset"]["path"] = data.string();
  const fs::path cfg2 = write_config("tiny_data.json", j.dump());
  const fs::path out = kWork / "train";
  ASSERT_EQ(run("train --config " + cfg2.string() + " --out " + out.string() + " --threads 2"), 0);
  const json rec = json::parse(riswsr::io::read_text(out / "run_record.json"));
  const double last_test = rec.at("epochs").back().at("test_wsr").get<double>();

  j["evaluate"]["checkpoint"] = (out / "checkpoint").string();
  const fs::path cfg3 = write_config("tiny_eval.json", j.dump());
  ASSERT_EQ(run("evaluate --config " + cfg3.string() + " --out " + (kWork / "eval").string()), 0);
  const json ev = json::parse(riswsr::io::read_text(kWork / "eval" / "evaluate.json"));
  EXPECT_NEAR(ev.at("wsr").at("mean").get<double>(), last_test, 1e-12);

  ASSERT_EQ(run("baselines --config " + cfg2.string() + " --out " + (kWork / "base").string()), 0);
  const json bl = json::parse(riswsr::io::read_text(kWork / "base" / "baselines.json"));
  EXPECT_GT(bl.at("random_phase").at("mean").get<double>(), 0.0);
  EXPECT_GT(bl.at("identity_phase").at("mean").get<double>(), 0.0);

  // Re-running from the echoed config reproduces the metrics exactly.
  const fs::path out2 = kWork / "train2";
  ASSERT_EQ(run("train --config " + (out / "config.json").string() + " --out " + out2.string()), 0);
  const json rec2 = json::parse(riswsr::io::read_text(out2 / "run_record.json"));
  for (std::size_t e = 0; e < rec.at("epochs").size(); ++e) {
    EXPECT_EQ(rec.at("epochs")[e].at("train_wsr"), rec2.at("epochs")[e].at("train_wsr"));
    EXPECT_EQ(rec.at("epochs")[e].at("test_wsr"), rec2.at("epochs")[e].at("test_wsr"));
  }
}

TEST_F(Cli, SeedOverrideChangesData) {
  const fs::path cfg = write_config("tiny2.json", kTiny);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --out " + (kWork / "s1").string()), 0);
  ASSERT_EQ(run("generate --config " + cfg.string() + " --seed-override 99 --out " + (kWork / "s2").string()), 0);
  EXPECT_NE(riswsr::io::read_text(kWork / "s1" / "train" / "samples" / "000000.bin"),
            riswsr::io::read_text(kWork / "s2" / "train" / "samples" / "000000.bin"));
  const json echo = json::parse(riswsr::io::read_text(kWork / "s2" / "config.json"));
  EXPECT_EQ(echo.at("seed").get<std::uint64_t>(), 99u);
}
