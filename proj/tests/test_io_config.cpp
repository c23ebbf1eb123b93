// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "riswsr/config.hpp"
#include "riswsr/error.hpp"
#include "riswsr/io.hpp"

using namespace riswsr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("riswsr_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    config::parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Dataset, BitExactRoundTrip) {
  channel::GeometryConfig g;
  g.ris_rows = 3;
  g.ris_cols = 3;
  const auto [train, test] = training::build_dataset(g, channel::Regime::deterministic_plus_scatter, {4, 2}, 77);
  const fs::path dir = scratch("dataset");
  io::save_dataset(train, dir);
  const training::Dataset back = io::load_dataset(dir);
  EXPECT_EQ(back.geometry, train.geometry);
  EXPECT_EQ(back.regime, train.regime);
  EXPECT_EQ(back.split, train.split);
  EXPECT_EQ(back.master_seed, train.master_seed);
  EXPECT_EQ(back.stats, train.stats);
  EXPECT_EQ(back.generator, train.generator);
  ASSERT_EQ(back.size(), train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(back.samples[i].h, train.samples[i].h);
    EXPECT_EQ(back.samples[i].g, train.samples[i].g);
    EXPECT_EQ(back.samples[i].d, train.samples[i].d);
    EXPECT_EQ(back.samples[i].s_ii, train.samples[i].s_ii);
    EXPECT_EQ(back.samples[i].weights, train.samples[i].weights);
    EXPECT_EQ(back.samples[i].noise_power, train.samples[i].noise_power);
    EXPECT_EQ(back.samples[i].seed, train.samples[i].seed);
  }
  fs::remove_all(dir);
}

TEST(Dataset, CorruptFilesRejected) {
  channel::GeometryConfig g;
  g.ris_rows = 2;
  g.ris_cols = 2;
  const auto [train, test] = training::build_dataset(g, channel::Regime::iid, {2, 1}, 1);
  const fs::path dir = scratch("corrupt");
  io::save_dataset(train, dir);
  io::write_text(dir / "samples" / "000000.bin", "short");
  EXPECT_THROW(io::load_dataset(dir), FormatError);
  EXPECT_THROW(io::load_dataset(scratch("missing")), FormatError);
  fs::remove_all(dir);
}

TEST(Checkpoint, RoundTrip) {
  const auto np = risnet::init_params(risnet::partial_csi_specs(4), 12);
  const fs::path dir = scratch("ckpt");
  io::save_checkpoint(np, dir);
  const auto back = io::load_checkpoint(dir);
  EXPECT_EQ(back.specs(), np.specs());
  EXPECT_EQ(back.seed, np.seed);
  const auto a = np.flatten();
  const auto b = back.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].data, b[i].data);
  fs::remove_all(dir);
}

TEST(RunRecord, CsvLayout) {
  training::RunRecord r;
  r.epochs = {{1, 1.5, 1.25, 0.5}, {2, 1.75, 1.5, 0.25}};
  const fs::path dir = scratch("record");
  fs::create_directories(dir);
  io::write_run_record_csv(r, dir / "r.csv");
  io::write_run_record_json(r, dir / "r.json");
  const std::string csv = io::read_text(dir / "r.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_wsr,test_wsr,seconds");
  EXPECT_NE(csv.find("2,1.75,1.5,0.25"), std::string::npos);
  EXPECT_NE(io::read_text(dir / "r.json").find("test_wsr"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Config, EmptyObjectGivesDeskDefaults) {
  const config::RunConfig c = config::parse_config("{}");
  EXPECT_EQ(c.geometry.ris_rows, 18u);
  EXPECT_EQ(c.geometry.ris_cols, 18u);
  EXPECT_EQ(c.geometry.bs_antennas, 4u);
  EXPECT_EQ(c.geometry.users, 2u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, PaperTablePreset) {
  const config::RunConfig c = config::parse_config(R"({"preset": "paper-table"})");
  EXPECT_EQ(c.geometry.ris_rows, 36u);
  EXPECT_EQ(c.geometry.ris_cols, 36u);
  EXPECT_EQ(c.geometry.bs_antennas, 9u);
  EXPECT_EQ(c.geometry.users, 4u);
  EXPECT_EQ(c.train.batch_size, 512u);
  EXPECT_EQ(c.sizes.train, 10240u);
  EXPECT_EQ(c.sizes.test, 1024u);
}

TEST(Config, StrictSchema) {
  EXPECT_NE(error_of(R"({"fo": 1})").find("'fo'"), std::string::npos);
  EXPECT_NE(error_of(R"({"train": {"epochs": "many"}})").find("train.epochs"), std::string::npos);
  EXPECT_NE(error_of(R"({"geometry": {"ris_rows": -3}})").find("geometry.ris_rows"), std::string::npos);
  EXPECT_NE(error_of("{\n  \"seed\": 1,\n  oops\n}").find("3:"), std::string::npos);
  EXPECT_NE(error_of(R"({"preset": "nope"})"), "");
  EXPECT_NE(error_of(R"({"regime": "fog"})"), "");
}

TEST(Config, ValidationNamesField) {
  config::RunConfig c = config::parse_config(R"({"network": {"csi": "partial"}})");
  c.geometry.ris_rows = 12;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("anchor"), std::string::npos) << e.what();
  }
}

TEST(Config, EchoReparsesIdentically) {
  const config::RunConfig c = config::parse_config(
      R"({"preset": "desk-deterministic", "regime": "iid", "network": {"csi": "partial"},
          "train": {"epochs": 7}, "generator": {"deployment_seed": 5}})");
  const std::string e = config::echo(c);
  EXPECT_EQ(config::echo(config::parse_config(e)), e);
  EXPECT_NE(e.find("\"seed\""), std::string::npos);
}

TEST(Config, TrainSeedDerivedFromMasterSeed) {
  config::RunConfig a = config::parse_config(R"({"seed": 1})");
  config::RunConfig b = config::parse_config(R"({"seed": 2})");
  EXPECT_NE(a.train_config().seed, b.train_config().seed);
  EXPECT_EQ(a.train_config().seed, config::parse_config(R"({"seed": 1})").train_config().seed);
}
