// SPDX-License-Identifier: Apache-2.0

#include "riswsr/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "riswsr/error.hpp"

namespace riswsr::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using linalg::ComplexMatrix;

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  out << text;
  if (!out) throw FormatError("write failed: " + file.string());
}

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

class BinaryWriter {
 public:
  void put(double x) {
    const std::uint64_t v = to_little(std::bit_cast<std::uint64_t>(x));
    char b[8];
    std::memcpy(b, &v, 8);
    bytes_.append(b, 8);
  }
  void put(const ComplexMatrix& m) {
    for (const linalg::cplx& z : m.entries()) {
      put(z.real());
      put(z.imag());
    }
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class BinaryReader {
 public:
  BinaryReader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}
  double get() {
    if (pos_ + 8 > bytes_.size()) throw FormatError(name_ + ": truncated");
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return std::bit_cast<double>(to_little(v));
  }
  ComplexMatrix matrix(std::size_t rows, std::size_t cols) {
    ComplexMatrix m(rows, cols);
    for (linalg::cplx& z : m.entries()) {
      const double re = get();
      z = {re, get()};
    }
    return m;
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw FormatError(name_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }

 private:
  std::string bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

json geometry_json(const channel::GeometryConfig& g) {
  return {{"bs_antennas", g.bs_antennas},   {"ris_rows", g.ris_rows},
          {"ris_cols", g.ris_cols},         {"users", g.users},
          {"carrier_frequency", g.carrier_frequency}, {"bs_spacing", g.bs_spacing},
          {"ris_spacing", g.ris_spacing}};
}

channel::GeometryConfig geometry_from(const json& j) {
  channel::GeometryConfig g;
  g.bs_antennas = j.at("bs_antennas").get<std::size_t>();
  g.ris_rows = j.at("ris_rows").get<std::size_t>();
  g.ris_cols = j.at("ris_cols").get<std::size_t>();
  g.users = j.at("users").get<std::size_t>();
  g.carrier_frequency = j.at("carrier_frequency").get<double>();
  g.bs_spacing = j.at("bs_spacing").get<double>();
  g.ris_spacing = j.at("ris_spacing").get<double>();
  return g;
}

json generator_json(const channel::GeneratorConfig& c) {
  json j = {{"paths_h", c.paths_h},
            {"paths_g", c.paths_g},
            {"paths_d", c.paths_d},
            {"direct_blockage_db", c.direct_blockage_db},
            {"scatter_relative_db", c.scatter_relative_db},
            {"user_spread", c.user_spread},
            {"los_factor_db", c.los_factor_db},
            {"gain_scale", c.gain_scale},
            {"coupling_strength", c.coupling_strength},
            {"power_budget", c.power_budget},
            {"noise_power", c.noise_power},
            {"target_snr_db", c.target_snr_db}};
  j["deployment_seed"] = c.deployment_seed ? json(*c.deployment_seed) : json(nullptr);
  return j;
}

channel::GeneratorConfig generator_from(const json& j) {
  channel::GeneratorConfig c;
  c.paths_h = j.at("paths_h").get<std::size_t>();
  c.paths_g = j.at("paths_g").get<std::size_t>();
  c.paths_d = j.at("paths_d").get<std::size_t>();
  c.direct_blockage_db = j.at("direct_blockage_db").get<double>();
  c.scatter_relative_db = j.at("scatter_relative_db").get<double>();
  c.user_spread = j.at("user_spread").get<double>();
  c.los_factor_db = j.at("los_factor_db").get<double>();
  c.gain_scale = j.at("gain_scale").get<double>();
  c.coupling_strength = j.at("coupling_strength").get<double>();
  c.power_budget = j.at("power_budget").get<double>();
  c.noise_power = j.at("noise_power").get<double>();
  c.target_snr_db = j.at("target_snr_db").get<double>();
  if (!j.at("deployment_seed").is_null()) c.deployment_seed = j.at("deployment_seed").get<std::uint64_t>();
  return c;
}

std::string sample_file(std::size_t i) {
  std::ostringstream ss;
  ss << "samples/" << std::setw(6) << std::setfill('0') << i << ".bin";
  return ss.str();
}

json parse_manifest(const fs::path& dir, const char* format) {
  const fs::path file = dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_text(file));
  } catch (const json::parse_error& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  if (j.value("format", "") != format || j.value("version", 0) != kFormatVersion) {
    throw FormatError(file.string() + ": not a " + std::string(format) + " v" +
                      std::to_string(kFormatVersion) + " manifest");
  }
  return j;
}

}  // namespace

void save_dataset(const training::Dataset& data, const fs::path& dir) {
  data.validate();
  fs::create_directories(dir / "samples");
  json samples = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const channel::ChannelSample& s = data.samples[i];
    BinaryWriter w;
    w.put(s.h);
    w.put(s.g);
    w.put(s.d);
    w.put(s.s_ii);
    for (double x : s.weights) w.put(x);
    write_text(dir / sample_file(i), w.bytes());
    samples.push_back({{"file", sample_file(i)},
                       {"seed", s.seed},
                       {"noise_power", s.noise_power},
                       {"power_budget", s.power_budget}});
  }
  const json manifest = {
      {"format", "riswsr-dataset"},
      {"version", kFormatVersion},
      {"layout", "H,G,D,S_II as float64 (re,im) row-major; then w"},
      {"split", training::to_string(data.split)},
      {"regime", channel::to_string(data.regime)},
      {"master_seed", data.master_seed},
      {"geometry", geometry_json(data.geometry)},
      {"generator", generator_json(data.generator)},
      {"feature_stats",
       {{"g_mean_db", data.stats.g_mean_db},
        {"g_std_db", data.stats.g_std_db},
        {"j_mean_db", data.stats.j_mean_db},
        {"j_std_db", data.stats.j_std_db}}},
      {"samples", samples}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

training::Dataset load_dataset(const fs::path& dir) {
  const json j = parse_manifest(dir, "riswsr-dataset");
  training::Dataset d;
  try {
    d.split = training::split_from_string(j.at("split").get<std::string>());
    d.regime = channel::regime_from_string(j.at("regime").get<std::string>());
    d.master_seed = j.at("master_seed").get<std::uint64_t>();
    d.geometry = geometry_from(j.at("geometry"));
    d.generator = generator_from(j.at("generator"));
    const json& st = j.at("feature_stats");
    d.stats = {st.at("g_mean_db").get<double>(), st.at("g_std_db").get<double>(),
               st.at("j_mean_db").get<double>(), st.at("j_std_db").get<double>()};
    const std::size_t n = d.geometry.elements();
    const std::size_t m = d.geometry.bs_antennas;
    const std::size_t u = d.geometry.users;
    for (const json& e : j.at("samples")) {
      const std::string file = e.at("file").get<std::string>();
      BinaryReader r(read_text(dir / file), file);
      channel::ChannelSample s;
      s.h = r.matrix(n, m);
      s.g = r.matrix(u, n);
      s.d = r.matrix(u, m);
      s.s_ii = r.matrix(n, n);
      s.weights.resize(u);
      for (double& w : s.weights) w = r.get();
      r.expect_end();
      s.seed = e.at("seed").get<std::uint64_t>();
      s.noise_power = e.at("noise_power").get<double>();
      s.power_budget = e.at("power_budget").get<double>();
      s.regime = d.regime;
      d.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  d.validate();
  return d;
}

void save_checkpoint(const risnet::NetworkParams& params, const fs::path& dir) {
  fs::create_directories(dir);
  BinaryWriter w;
  json specs = json::array();
  json tensors = json::array();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const risnet::LayerParams& lp = params.layers[l];
    specs.push_back({{"kind", risnet::to_string(lp.spec.kind)}, {"in_dim", lp.spec.in_dim}, {"q", lp.spec.q}});
    for (std::size_t c = 0; c < lp.spec.classes(); ++c)
      for (std::size_t unit = 0; unit < lp.spec.units(); ++unit) {
        const risnet::UnitParams& up = lp.at(static_cast<risnet::FeatureClass>(c), unit);
        for (const double x : up.weight.data) w.put(x);
        for (const double x : up.bias.data) w.put(x);
        tensors.push_back({{"layer", l}, {"class", risnet::kClassNames[c]}, {"unit", unit},
                           {"weight_shape", up.weight.shape}, {"bias_shape", up.bias.shape}});
      }
  }
  write_text(dir / "params.bin", w.bytes());
  const json manifest = {{"format", "riswsr-checkpoint"},
                         {"version", kFormatVersion},
                         {"seed", params.seed},
                         {"class_order", {"cc", "ca", "oc", "oa"}},
                         {"parameter_count", params.parameter_count()},
                         {"specs", specs},
                         {"tensors", tensors}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

risnet::NetworkParams load_checkpoint(const fs::path& dir) {
  const json j = parse_manifest(dir, "riswsr-checkpoint");
  std::vector<risnet::LayerSpec> specs;
  std::uint64_t seed = 0;
  try {
    for (const json& s : j.at("specs")) {
      specs.push_back({risnet::layer_kind_from_string(s.at("kind").get<std::string>()),
                       s.at("in_dim").get<std::size_t>(), s.at("q").get<std::size_t>()});
    }
    seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  if (specs.empty()) throw FormatError("checkpoint: no layers");
  risnet::validate_specs(specs, specs.front().in_dim);
  risnet::NetworkParams p = risnet::zero_params(specs);
  p.seed = seed;
  BinaryReader r(read_text(dir / "params.bin"), "params.bin");
  for (risnet::LayerParams& lp : p.layers)
    for (risnet::UnitParams& up : lp.units) {
      for (double& x : up.weight.data) x = r.get();
      for (double& x : up.bias.data) x = r.get();
    }
  r.expect_end();
  return p;
}

void write_run_record_csv(const training::RunRecord& rec, const fs::path& file) {
  std::ostringstream ss;
  ss << "epoch,train_wsr,test_wsr,seconds\n" << std::setprecision(17);
  for (const training::EpochRecord& e : rec.epochs) {
    ss << e.epoch << ',' << e.train_wsr << ',' << e.test_wsr << ',' << e.seconds << '\n';
  }
  write_text(file, ss.str());
}

void write_run_record_json(const training::RunRecord& rec, const fs::path& file) {
  json epochs = json::array();
  for (const training::EpochRecord& e : rec.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_wsr", e.train_wsr}, {"test_wsr", e.test_wsr}, {"seconds", e.seconds}});
  }
  json j = {{"epochs", epochs}, {"checkpoint", rec.checkpoint}};
  if (!rec.config_echo.empty()) j["config"] = json::parse(rec.config_echo);
  write_text(file, j.dump(2) + "\n");
}

}  // namespace riswsr::io
