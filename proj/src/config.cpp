// SPDX-License-Identifier: Apache-2.0

#include "riswsr/config.hpp"

#include <algorithm>
#include <initializer_list>

#include <json.hpp>

#include "riswsr/error.hpp"
#include "riswsr/io.hpp"

namespace riswsr::config {

using json = nlohmann::json;

std::vector<risnet::LayerSpec> RunConfig::layer_specs() const {
  if (train.csi.mode == training::CsiMode::partial) {
    return risnet::partial_csi_specs(network.q, channel::kInputFeatures);
  }
  return risnet::full_csi_specs(network.q, network.hidden_layers, channel::kInputFeatures);
}

void RunConfig::validate() const {
  geometry.validate();
  train.validate();
  if (sizes.train == 0 || sizes.test == 0) throw ConfigError("dataset.train and dataset.test must be >= 1");
  if (network.q == 0) throw ConfigError("network.q must be >= 1");
  if (train.csi.mode == training::CsiMode::full && network.hidden_layers == 0) {
    throw ConfigError("network.hidden_layers must be >= 1");
  }
  if (!(generator.gain_scale > 0.0)) throw ConfigError("generator.gain_scale must be > 0");
  if (!(generator.power_budget > 0.0)) throw ConfigError("generator.power_budget must be > 0");
  if (generator.noise_power < 0.0) throw ConfigError("generator.noise_power must be >= 0");
  if (generator.coupling_strength < 0.0) throw ConfigError("generator.coupling_strength must be >= 0");
  if (generator.user_spread < 0.0) throw ConfigError("generator.user_spread must be >= 0");
  if (regime != channel::Regime::iid && generator.paths_h < geometry.bs_antennas) {
    throw ConfigError("generator.paths_h must be >= geometry.bs_antennas");
  }
  if (generator.paths_g == 0 || generator.paths_d == 0) {
    throw ConfigError("generator.paths_g and generator.paths_d must be >= 1");
  }
  // Throws when the anchor grid does not tile the RIS.
  training::network_input_grid(geometry, train.csi, layer_specs());
}

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig t = train;
  t.seed = channel::derive_seed(seed, 3);
  return t;
}

std::vector<std::string> preset_names() { return {"desk-deterministic", "paper-table"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk-deterministic") {
    c.seed = 2024;
    c.regime = channel::Regime::deterministic;
    c.sizes = {256, 64};
    c.train.epochs = 40;
    c.train.batch_size = 16;
    c.train.learning_rate = 3e-3;
    return c;
  }
  if (name == "paper-table") {
    c.geometry.ris_rows = 36;
    c.geometry.ris_cols = 36;
    c.geometry.bs_antennas = 9;
    c.geometry.users = 4;
    c.generator.paths_h = 10;
    c.sizes = {10240, 1024};
    c.train.batch_size = 512;
    c.train.learning_rate = 1e-3;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string where, std::initializer_list<const char*> allowed)
      : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    for (const auto& item : obj_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* k) { return item.key() == k; });
      if (!known) throw ConfigError("unknown key '" + field(item.key()) + "'");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string field(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void count(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key) + ": expected a nonnegative integer");
    out = v.get<std::size_t>();
  }
  void seed(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key) + ": expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  void real(const char* key, double& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v.get<double>();
  }
  void text(const char* key, std::string& out) const {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v.get<std::string>();
  }

 private:
  const json& obj_;
  std::string where_;
};

void line_and_column(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 0;
    std::size_t col = 0;
    line_and_column(text, e.byte == 0 ? 0 : e.byte - 1, line, col);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON parse error: " + e.what());
  }

  const Reader top(root, "",
                   {"preset", "seed", "regime", "geometry", "generator", "dataset", "network", "train",
                    "wmmse", "evaluate", "baselines"});
  RunConfig c;
  if (top.has("preset")) {
    std::string name;
    top.text("preset", name);
    c = preset(name);
  }
  top.seed("seed", c.seed);
  if (top.has("regime")) {
    std::string r;
    top.text("regime", r);
    try {
      c.regime = channel::regime_from_string(r);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("regime: ") + e.what());
    }
  }
  if (top.has("geometry")) {
    const Reader g(top.at("geometry"), "geometry",
                   {"bs_antennas", "ris_rows", "ris_cols", "users", "carrier_frequency", "bs_spacing",
                    "ris_spacing"});
    g.count("bs_antennas", c.geometry.bs_antennas);
    g.count("ris_rows", c.geometry.ris_rows);
    g.count("ris_cols", c.geometry.ris_cols);
    g.count("users", c.geometry.users);
    g.real("carrier_frequency", c.geometry.carrier_frequency);
    g.real("bs_spacing", c.geometry.bs_spacing);
    g.real("ris_spacing", c.geometry.ris_spacing);
  }
  if (top.has("generator")) {
    const Reader g(top.at("generator"), "generator",
                   {"paths_h", "paths_g", "paths_d", "direct_blockage_db", "scatter_relative_db",
                    "user_spread", "los_factor_db", "gain_scale", "coupling_strength", "power_budget",
                    "noise_power", "target_snr_db", "deployment_seed"});
    g.count("paths_h", c.generator.paths_h);
    g.count("paths_g", c.generator.paths_g);
    g.count("paths_d", c.generator.paths_d);
    g.real("direct_blockage_db", c.generator.direct_blockage_db);
    g.real("scatter_relative_db", c.generator.scatter_relative_db);
    g.real("user_spread", c.generator.user_spread);
    g.real("los_factor_db", c.generator.los_factor_db);
    g.real("gain_scale", c.generator.gain_scale);
    g.real("coupling_strength", c.generator.coupling_strength);
    g.real("power_budget", c.generator.power_budget);
    g.real("noise_power", c.generator.noise_power);
    g.real("target_snr_db", c.generator.target_snr_db);
    if (g.has("deployment_seed")) {
      if (g.at("deployment_seed").is_null()) {
        c.generator.deployment_seed.reset();
      } else {
        std::uint64_t s = 0;
        g.seed("deployment_seed", s);
        c.generator.deployment_seed = s;
      }
    }
  }
  if (top.has("dataset")) {
    const Reader d(top.at("dataset"), "dataset", {"train", "test", "path"});
    d.count("train", c.sizes.train);
    d.count("test", c.sizes.test);
    d.text("path", c.dataset_path);
  }
  if (top.has("network")) {
    const Reader n(top.at("network"), "network", {"csi", "q", "hidden_layers", "anchor_rows", "anchor_cols"});
    if (n.has("csi")) {
      std::string m;
      n.text("csi", m);
      try {
        c.train.csi.mode = training::csi_mode_from_string(m);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("network.csi: ") + e.what());
      }
    }
    n.count("q", c.network.q);
    n.count("hidden_layers", c.network.hidden_layers);
    n.count("anchor_rows", c.train.csi.anchor_rows);
    n.count("anchor_cols", c.train.csi.anchor_cols);
  }
  if (top.has("train")) {
    const Reader t(top.at("train"), "train", {"epochs", "batch_size", "learning_rate", "precoder_refresh_every"});
    t.count("epochs", c.train.epochs);
    t.count("batch_size", c.train.batch_size);
    t.real("learning_rate", c.train.learning_rate);
    t.count("precoder_refresh_every", c.train.precoder_refresh_every);
  }
  if (top.has("wmmse")) {
    const Reader w(top.at("wmmse"), "wmmse", {"max_iters", "rel_tol", "bisection_tol", "mu_growth"});
    w.count("max_iters", c.train.wmmse.max_iters);
    w.real("rel_tol", c.train.wmmse.rel_tol);
    w.real("bisection_tol", c.train.wmmse.bisection_tol);
    w.real("mu_growth", c.train.wmmse.mu_growth);
  }
  if (top.has("evaluate")) {
    const Reader e(top.at("evaluate"), "evaluate", {"checkpoint"});
    e.text("checkpoint", c.checkpoint_path);
  }
  if (top.has("baselines")) {
    const Reader b(top.at("baselines"), "baselines", {"seed"});
    b.seed("seed", c.baseline_seed);
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

std::string echo(const RunConfig& c) {
  const channel::GeneratorConfig& g = c.generator;
  json j = {
      {"seed", c.seed},
      {"regime", channel::to_string(c.regime)},
      {"geometry",
       {{"bs_antennas", c.geometry.bs_antennas},
        {"ris_rows", c.geometry.ris_rows},
        {"ris_cols", c.geometry.ris_cols},
        {"users", c.geometry.users},
        {"carrier_frequency", c.geometry.carrier_frequency},
        {"bs_spacing", c.geometry.bs_spacing},
        {"ris_spacing", c.geometry.ris_spacing}}},
      {"generator",
       {{"paths_h", g.paths_h},
        {"paths_g", g.paths_g},
        {"paths_d", g.paths_d},
        {"direct_blockage_db", g.direct_blockage_db},
        {"scatter_relative_db", g.scatter_relative_db},
        {"user_spread", g.user_spread},
        {"los_factor_db", g.los_factor_db},
        {"gain_scale", g.gain_scale},
        {"coupling_strength", g.coupling_strength},
        {"power_budget", g.power_budget},
        {"noise_power", g.noise_power},
        {"target_snr_db", g.target_snr_db},
        {"deployment_seed", g.deployment_seed ? json(*g.deployment_seed) : json(nullptr)}}},
      {"dataset", {{"train", c.sizes.train}, {"test", c.sizes.test}, {"path", c.dataset_path}}},
      {"network",
       {{"csi", training::to_string(c.train.csi.mode)},
        {"q", c.network.q},
        {"hidden_layers", c.network.hidden_layers},
        {"anchor_rows", c.train.csi.anchor_rows},
        {"anchor_cols", c.train.csi.anchor_cols}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"precoder_refresh_every", c.train.precoder_refresh_every}}},
      {"wmmse",
       {{"max_iters", c.train.wmmse.max_iters},
        {"rel_tol", c.train.wmmse.rel_tol},
        {"bisection_tol", c.train.wmmse.bisection_tol},
        {"mu_growth", c.train.wmmse.mu_growth}}},
      {"evaluate", {{"checkpoint", c.checkpoint_path}}},
      {"baselines", {{"seed", c.baseline_seed}}}};
  return j.dump(2) + "\n";
}

}  // namespace riswsr::config
