#include "naf/run_config.hpp"

#include <fstream>
#include <set>

namespace naf {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw ConfigError("config key '" + (path.empty() ? std::string("<root>") : path) +
                      "' must be an object");
  }
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw ConfigError("unknown config key '" + (path.empty() ? "" : path + ".") +
                        item.key() + "'");
    }
  }
}

template <typename V>
void read(const json& obj, const std::string& path, const char* key, V& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<V, int>) {
      if (v.is_null()) {
        out = -1;
        return;
      }
      if (!v.is_number_integer()) throw ConfigError("expected an integer");
    } else if constexpr (std::is_same_v<V, double>) {
      if (!v.is_number()) throw ConfigError("expected a number");
    } else if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected true or false");
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) throw ConfigError("expected a string");
    }
    out = v.get<V>();
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + (path.empty() ? "" : path + ".") + key + "': " + e.what());
  }
}

void read_u64(const json& obj, const std::string& path, const char* key, std::uint64_t& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + path + "." + key + "': expected a non-negative integer");
  }
  out = v.get<std::uint64_t>();
}

std::vector<int> read_int_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "': expected a list of integers");
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw ConfigError("config key '" + key + "': expected a list of integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

VariantKind read_variant(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "': expected a variant name");
  try {
    return parse_variant(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

json nullable(int v) { return v < 0 ? json(nullptr) : json(v); }

}  // namespace

json to_json(const ModelConfig& cfg) {
  return json{{"variant", std::string(variant_id(cfg.variant))},
              {"width", cfg.base_width},
              {"enc_blocks", cfg.enc_blocks},
              {"mid_blocks", cfg.mid_blocks},
              {"dec_blocks", cfg.dec_blocks},
              {"eca_kernel", cfg.eca_kernel},
              {"gn_groups", cfg.gn_groups}};
}

namespace {
void read_model_fields(const json& m, const std::string& path, ModelConfig& cfg) {
  read(m, path, "width", cfg.base_width);
  if (m.contains("enc_blocks")) cfg.enc_blocks = read_int_list(m.at("enc_blocks"), path + ".enc_blocks");
  read(m, path, "mid_blocks", cfg.mid_blocks);
  if (m.contains("dec_blocks")) cfg.dec_blocks = read_int_list(m.at("dec_blocks"), path + ".dec_blocks");
  read(m, path, "eca_kernel", cfg.eca_kernel);
  read(m, path, "gn_groups", cfg.gn_groups);
}
}  // namespace

ModelConfig model_config_from_json(const json& doc) {
  reject_unknown(doc, "model", {"variant", "width", "enc_blocks", "mid_blocks", "dec_blocks",
                                "eca_kernel", "gn_groups"});
  ModelConfig cfg;
  if (doc.contains("variant")) cfg.variant = read_variant(doc.at("variant"), "model.variant");
  read_model_fields(doc, "model", cfg);
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const json& doc) {
  reject_unknown(doc, "", {"variant", "variants", "model", "train", "data", "output_dir",
                           "grid_images"});
  RunConfig cfg;
  if (doc.contains("variant")) cfg.variant = read_variant(doc.at("variant"), "variant");
  if (doc.contains("variants")) {
    const json& list = doc.at("variants");
    if (!list.is_array() || list.empty()) {
      throw ConfigError("config key 'variants': expected a non-empty list of variant names");
    }
    cfg.variants.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.variants.push_back(read_variant(list[i], "variants[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown(m, "model", {"width", "enc_blocks", "mid_blocks", "dec_blocks", "eca_kernel",
                                "gn_groups"});
    read_model_fields(m, "model", cfg.model);
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown(t, "train", {"epochs", "batch_size", "lr_init", "lr_final", "beta1", "beta2",
                                "eps", "patience", "improve_eps", "seed", "deterministic"});
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "lr_init", cfg.train.lr_init);
    read(t, "train", "lr_final", cfg.train.lr_final);
    read(t, "train", "beta1", cfg.train.beta1);
    read(t, "train", "beta2", cfg.train.beta2);
    read(t, "train", "eps", cfg.train.eps);
    read(t, "train", "patience", cfg.train.patience);
    read(t, "train", "improve_eps", cfg.train.improve_eps);
    read_u64(t, "train", "seed", cfg.train.seed);
    read(t, "train", "deterministic", cfg.train.deterministic);
  }
  if (doc.contains("data")) {
    const json& d = doc.at("data");
    reject_unknown(d, "data", {"dir", "dataset_seed", "subset_size", "val_size", "test_size",
                               "cache_degraded"});
    read(d, "data", "dir", cfg.data.dir);
    read_u64(d, "data", "dataset_seed", cfg.data.dataset_seed);
    read(d, "data", "subset_size", cfg.data.subset_size);
    read(d, "data", "val_size", cfg.data.val_size);
    read(d, "data", "test_size", cfg.data.test_size);
    read(d, "data", "cache_degraded", cfg.data.cache_degraded);
  }
  if (doc.contains("output_dir")) read(doc, "", "output_dir", cfg.output_dir);
  if (doc.contains("grid_images")) read(doc, "", "grid_images", cfg.grid_images);

  cfg.model.variant = cfg.variant;
  try {
    cfg.model.validate();
    for (VariantKind v : cfg.variants) cfg.model_for(v).validate();
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  json variants = json::array();
  for (VariantKind v : cfg.variants) variants.push_back(std::string(variant_id(v)));
  json model = to_json(cfg.model);
  model.erase("variant");
  return json{
      {"variant", std::string(variant_id(cfg.variant))},
      {"variants", variants},
      {"model", model},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"lr_init", cfg.train.lr_init},
        {"lr_final", cfg.train.lr_final},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"eps", cfg.train.eps},
        {"patience", cfg.train.patience},
        {"improve_eps", cfg.train.improve_eps},
        {"seed", cfg.train.seed},
        {"deterministic", cfg.train.deterministic}}},
      {"data",
       {{"dir", cfg.data.dir},
        {"dataset_seed", cfg.data.dataset_seed},
        {"subset_size", nullable(cfg.data.subset_size)},
        {"val_size", nullable(cfg.data.val_size)},
        {"test_size", nullable(cfg.data.test_size)},
        {"cache_degraded", cfg.data.cache_degraded}}},
      {"output_dir", cfg.output_dir},
      {"grid_images", cfg.grid_images}};
}

void write_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace naf
