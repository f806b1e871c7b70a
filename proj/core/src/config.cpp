#include "walnet/config.hpp"

#include <cmath>

#include "walnet/errors.hpp"
#include "walnet/io.hpp"

namespace walnet::config {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Overlays `user` onto `base`, rejecting keys the schema does not know.
void merge_strict(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config key '" + path + "': expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string here = join(path, key);
    if (!base.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, here);
    } else {
      slot = value;
    }
  }
}

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  template <class T>
  T get(const std::string& key) const {
    const std::string where = join(path_, key);
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + where + "': wrong type (found " +
                        std::string(node_.at(key).type_name()) + ")");
    }
  }

  int get_int(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_number_integer()) {
      throw ConfigError("config key '" + join(path_, key) + "': expected an integer");
    }
    return v.get<int>();
  }

  double get_number(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + join(path_, key) + "': expected a number");
    return v.get<double>();
  }

  std::uint64_t get_u64(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_number_unsigned()) {
      throw ConfigError("config key '" + join(path_, key) + "': expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool get_bool(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError("config key '" + join(path_, key) + "': expected true/false");
    return v.get<bool>();
  }

  std::string get_string(const std::string& key) const {
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError("config key '" + join(path_, key) + "': expected a string");
    return v.get<std::string>();
  }

  Reader child(const std::string& key) const { return Reader(node_.at(key), join(path_, key)); }
  std::string key_path(const std::string& key) const { return join(path_, key); }

 private:
  const json& node_;
  std::string path_;
};

/// Re-raises a validation error raised by a library constructor with the key prefixed.
template <class Fn>
auto keyed(const std::string& key, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace

json model_to_json(const model::ModelConfig& m) {
  json sizes = json::array();
  for (const auto& [r, c] : m.roi.output_sizes) sizes.push_back({r, c});
  return {{"input_size", m.input_size},
          {"in_channels", m.in_channels},
          {"widths", m.widths},
          {"blocks", m.blocks},
          {"stem_width", m.stem_width},
          {"use_split_attention", m.use_split_attention},
          {"use_attention", m.use_attention},
          {"use_segmentation", m.use_segmentation},
          {"aspp_width", m.aspp_width},
          {"aspp_rates", m.aspp_rates},
          {"low_level_width", m.low_level_width},
          {"decoder_width", m.decoder_width},
          {"roi_strategy", std::string(rcm::to_string(m.roi.strategy))},
          {"roi_threshold", m.roi.threshold},
          {"roi_lambda_frac", m.roi.lambda_frac},
          {"roi_output_sizes", sizes}};
}

namespace {

template <std::size_t N>
std::array<int, N> int_array(const Reader& r, const std::string& key) {
  const auto v = r.get<std::vector<int>>(key);
  if (v.size() != N) {
    throw ConfigError("config key '" + r.key_path(key) + "': expected " + std::to_string(N) + " entries");
  }
  std::array<int, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

model::ModelConfig read_model(const Reader& r) {
  model::ModelConfig m;
  m.input_size = r.get_int("input_size");
  m.in_channels = r.get_int("in_channels");
  m.widths = int_array<4>(r, "widths");
  m.blocks = int_array<4>(r, "blocks");
  m.stem_width = r.get_int("stem_width");
  m.use_split_attention = r.get_bool("use_split_attention");
  m.use_attention = r.get_bool("use_attention");
  m.use_segmentation = r.get_bool("use_segmentation");
  m.aspp_width = r.get_int("aspp_width");
  m.aspp_rates = r.get<std::vector<int>>("aspp_rates");
  m.low_level_width = r.get_int("low_level_width");
  m.decoder_width = r.get_int("decoder_width");
  const std::string strategy = r.get_string("roi_strategy");
  m.roi.strategy = keyed(r.key_path("roi_strategy"), [&] { return rcm::parse_roi_strategy(strategy); });
  m.roi.threshold = r.get_number("roi_threshold");
  m.roi.lambda_frac = r.get_number("roi_lambda_frac");
  for (const auto& pair : r.get<std::vector<std::vector<int>>>("roi_output_sizes")) {
    if (pair.size() != 2) {
      throw ConfigError("config key '" + r.key_path("roi_output_sizes") + "': entries are [rows, cols]");
    }
    m.roi.output_sizes.emplace_back(pair[0], pair[1]);
  }
  return m;
}

}  // namespace

model::ModelConfig model_from_json(const json& j) {
  json doc = model_to_json(model::ModelConfig{});
  merge_strict(doc, j, "model");
  auto m = read_model(Reader(doc, "model"));
  keyed("model", [&] { m.validate(); });
  return m;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("config key 'name': must not be empty");
  if (seeds < 1) throw ConfigError("config key 'seeds': must be >= 1");
  if (data.dir.empty()) data.synthetic.validate();
  const auto& r = data.ratios;
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ConfigError("config key 'data.ratios': must be non-negative and sum to 1");
  }
  model.validate();
  if (model.use_segmentation && !model.use_attention) {
    throw ConfigError("config key 'model.use_segmentation': pseudo masks need use_attention");
  }
  pgm.validate();
  if (train.epochs < 1) throw ConfigError("config key 'train.epochs': must be >= 1");
  if (train.batch_size < 1) throw ConfigError("config key 'train.batch_size': must be >= 1");
  if (!(train.learning_rate > 0)) throw ConfigError("config key 'train.learning_rate': must be > 0");
  if (!(train.beta1 >= 0 && train.beta1 < 1) || !(train.beta2 >= 0 && train.beta2 < 1)) {
    throw ConfigError("config key 'train.beta1/beta2': must lie in [0,1)");
  }
  if (!(train.adam_eps > 0)) throw ConfigError("config key 'train.adam_eps': must be > 0");
  if (train.patience < 0) throw ConfigError("config key 'train.patience': must be >= 0");
}

json ExperimentConfig::to_json() const {
  json synth = data.synthetic.to_json();
  return {{"schema_version", kSchemaVersion},
          {"name", name},
          {"seed", seed},
          {"seeds", seeds},
          {"data",
           {{"dir", data.dir},
            {"synthetic", synth},
            {"ratios", {data.ratios.train, data.ratios.val, data.ratios.test}},
            {"split_level", data::to_string(data.split_level)}}},
          {"model", model_to_json(model)},
          {"pgm",
           {{"k", pgm.superpixel.k},
            {"sigma", pgm.superpixel.sigma},
            {"min_size", pgm.superpixel.min_size},
            {"threshold", pgm.threshold}}},
          {"train",
           {{"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"learning_rate", train.learning_rate},
            {"beta1", train.beta1},
            {"beta2", train.beta2},
            {"adam_eps", train.adam_eps},
            {"patience", train.patience}}}};
}

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (j.contains("schema_version")) {
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kSchemaVersion) {
      throw ConfigError("config key 'schema_version': expected " + std::to_string(kSchemaVersion));
    }
  }
  json doc = ExperimentConfig{}.to_json();
  merge_strict(doc, j, "");
  const Reader root(doc, "");

  ExperimentConfig cfg;
  cfg.name = root.get_string("name");
  cfg.seed = root.get_u64("seed");
  cfg.seeds = root.get_int("seeds");

  const Reader d = root.child("data");
  cfg.data.dir = d.get_string("dir");
  const Reader s = d.child("synthetic");
  cfg.data.synthetic.counts = int_array<kNumClasses>(s, "counts");
  cfg.data.synthetic.size = s.get_int("size");
  cfg.data.synthetic.seed = s.get_u64("seed");
  const Reader t = s.child("texture");
  auto& tex = cfg.data.synthetic.texture;
  tex.background_lo = t.get_number("background_lo");
  tex.background_hi = t.get_number("background_hi");
  tex.speckle_std = t.get_number("speckle_std");
  tex.wall_lo = t.get_number("wall_lo");
  tex.wall_hi = t.get_number("wall_hi");
  tex.hyper_mean = t.get_number("hyper_mean");
  tex.hypo_mean = t.get_number("hypo_mean");
  tex.lesion_jitter = t.get_number("lesion_jitter");
  tex.ry_lo = t.get_number("ry_lo");
  tex.ry_hi = t.get_number("ry_hi");
  tex.rx_lo = t.get_number("rx_lo");
  tex.rx_hi = t.get_number("rx_hi");
  tex.clutter_min = t.get_int("clutter_min");
  tex.clutter_max = t.get_int("clutter_max");
  tex.clutter_radius_lo = t.get_number("clutter_radius_lo");
  tex.clutter_radius_hi = t.get_number("clutter_radius_hi");
  const auto ratios = d.get<std::vector<double>>("ratios");
  if (ratios.size() != 3) throw ConfigError("config key 'data.ratios': expected [train, val, test]");
  cfg.data.ratios = {ratios[0], ratios[1], ratios[2]};
  const std::string level = d.get_string("split_level");
  cfg.data.split_level = keyed("data.split_level", [&] { return data::parse_split_level(level); });

  cfg.model = read_model(root.child("model"));

  const Reader p = root.child("pgm");
  cfg.pgm.superpixel.k = p.get_number("k");
  cfg.pgm.superpixel.sigma = p.get_number("sigma");
  cfg.pgm.superpixel.min_size = p.get_int("min_size");
  cfg.pgm.threshold = p.get_number("threshold");

  const Reader tr = root.child("train");
  cfg.train.epochs = tr.get_int("epochs");
  cfg.train.batch_size = tr.get_int("batch_size");
  cfg.train.learning_rate = tr.get_number("learning_rate");
  cfg.train.beta1 = tr.get_number("beta1");
  cfg.train.beta2 = tr.get_number("beta2");
  cfg.train.adam_eps = tr.get_number("adam_eps");
  cfg.train.patience = tr.get_int("patience");

  cfg.validate();
  return cfg;
}

ExperimentConfig load(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

void apply_override(json& doc, const std::string& key, const std::string& value) {
  const json schema = ExperimentConfig{}.to_json();
  const json* node = &schema;
  json* target = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty() || !node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[part];
    if (!target->is_object()) *target = json::object();
    target = &(*target)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "': expected a leaf key");
  try {
    *target = json::parse(value);
  } catch (const json::parse_error&) {
    *target = value;
  }
}

}  // namespace walnet::config
