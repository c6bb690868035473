#include "wtsr/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "wtsr/image_io.hpp"

namespace wtsr {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(origin + ": invalid JSON");
  return j;
}

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw Error(path + "." + it.key() + ": unknown key");
}

int64_t get_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<int64_t>() <= 0)
    throw Error(path + ": expected a positive integer");
  return v.get<int64_t>();
}

// epochs may be zero (no-op training leaves the checkpoint at initialization)
int64_t get_nonneg(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<int64_t>() < 0)
    throw Error(path + ": expected a non-negative integer");
  return v.get<int64_t>();
}

double get_positive(const json& v, const std::string& path) {
  if (!v.is_number() || v.get<double>() <= 0.0) throw Error(path + ": expected a positive number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw Error(path + ": expected a string");
  return v.get<std::string>();
}

NetOverrides parse_overrides(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw Error(path + ": expected an object");
  require_keys(obj, {"feature_channels", "n_groups", "n_blocks_per_group", "ca_reduction"}, path);
  NetOverrides o;
  if (obj.contains("feature_channels"))
    o.feature_channels = get_count(obj["feature_channels"], path + ".feature_channels");
  if (obj.contains("n_groups")) o.n_groups = get_count(obj["n_groups"], path + ".n_groups");
  if (obj.contains("n_blocks_per_group"))
    o.n_blocks_per_group = get_count(obj["n_blocks_per_group"], path + ".n_blocks_per_group");
  if (obj.contains("ca_reduction"))
    o.ca_reduction = get_count(obj["ca_reduction"], path + ".ca_reduction");
  return o;
}

json overrides_json(const NetOverrides& o) {
  json j = json::object();
  if (o.feature_channels) j["feature_channels"] = *o.feature_channels;
  if (o.n_groups) j["n_groups"] = *o.n_groups;
  if (o.n_blocks_per_group) j["n_blocks_per_group"] = *o.n_blocks_per_group;
  if (o.ca_reduction) j["ca_reduction"] = *o.ca_reduction;
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

NetworkSpec NetOverrides::apply(NetworkSpec base) const {
  if (feature_channels) base.feature_channels = *feature_channels;
  if (n_groups) base.n_groups = *n_groups;
  if (n_blocks_per_group) base.n_blocks_per_group = *n_blocks_per_group;
  if (ca_reduction) base.ca_reduction = *ca_reduction;
  return base;
}

void TrainConfig::validate() const {
  if (scale < 2 || scale > 4) throw Error("config: scale must be 2, 3, or 4");
  for (auto [v, name] : {std::pair<int64_t, const char*>{patch, "patch"},
                         {batch, "batch"},
                         {patches_per_image_per_epoch, "patches_per_image_per_epoch"}})
    if (v <= 0) throw Error(std::string("config: ") + name + " must be positive");
  for (auto [v, name] : {std::pair<int64_t, const char*>{epochs_backbone, "epochs_backbone"},
                         {epochs_tpm, "epochs_tpm"},
                         {epochs_tfm, "epochs_tfm"}})
    if (v < 0) throw Error(std::string("config: ") + name + " must be non-negative");
  if (lr <= 0.0) throw Error("config: lr must be positive");
  backbone_spec().validate();
  tpm_spec().validate();
  tfm_spec().validate();
}

NetworkSpec TrainConfig::backbone_spec() const { return backbone.apply(NetworkSpec::backbone(scale)); }
NetworkSpec TrainConfig::tpm_spec() const { return tpm.apply(NetworkSpec::texture_predictor()); }
NetworkSpec TrainConfig::tfm_spec() const { return tfm.apply(NetworkSpec::texture_fusion(scale)); }

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
  const json j = parse_json(text, origin);
  if (!j.is_object()) throw Error(origin + ": expected a JSON object");
  require_keys(j,
               {"scale", "patch", "batch", "lr", "epochs_backbone", "epochs_tpm", "epochs_tfm",
                "patches_per_image_per_epoch", "seed", "backbone", "tpm", "tfm", "dataset",
                "output_dir"},
               "$");
  TrainConfig cfg;
  if (j.contains("scale")) cfg.scale = get_count(j["scale"], "$.scale");
  if (j.contains("patch")) cfg.patch = get_count(j["patch"], "$.patch");
  if (j.contains("batch")) cfg.batch = get_count(j["batch"], "$.batch");
  if (j.contains("lr")) cfg.lr = get_positive(j["lr"], "$.lr");
  if (j.contains("epochs_backbone"))
    cfg.epochs_backbone = get_nonneg(j["epochs_backbone"], "$.epochs_backbone");
  if (j.contains("epochs_tpm")) cfg.epochs_tpm = get_nonneg(j["epochs_tpm"], "$.epochs_tpm");
  if (j.contains("epochs_tfm")) cfg.epochs_tfm = get_nonneg(j["epochs_tfm"], "$.epochs_tfm");
  if (j.contains("patches_per_image_per_epoch"))
    cfg.patches_per_image_per_epoch =
        get_count(j["patches_per_image_per_epoch"], "$.patches_per_image_per_epoch");
  if (j.contains("seed")) {
    const json& v = j["seed"];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0))
      throw Error("$.seed: expected a non-negative integer");
    cfg.seed = v.get<uint64_t>();
  }
  if (j.contains("backbone")) cfg.backbone = parse_overrides(j["backbone"], "$.backbone");
  if (j.contains("tpm")) cfg.tpm = parse_overrides(j["tpm"], "$.tpm");
  if (j.contains("tfm")) cfg.tfm = parse_overrides(j["tfm"], "$.tfm");
  if (j.contains("dataset")) cfg.dataset = get_string(j["dataset"], "$.dataset");
  if (j.contains("output_dir")) cfg.output_dir = get_string(j["output_dir"], "$.output_dir");
  cfg.validate();
  return cfg;
}

TrainConfig parse_config(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

std::string serialize_config(const TrainConfig& cfg) {
  json j;
  j["scale"] = cfg.scale;
  j["patch"] = cfg.patch;
  j["batch"] = cfg.batch;
  j["lr"] = cfg.lr;
  j["epochs_backbone"] = cfg.epochs_backbone;
  j["epochs_tpm"] = cfg.epochs_tpm;
  j["epochs_tfm"] = cfg.epochs_tfm;
  j["patches_per_image_per_epoch"] = cfg.patches_per_image_per_epoch;
  j["seed"] = cfg.seed;
  j["backbone"] = overrides_json(cfg.backbone);
  j["tpm"] = overrides_json(cfg.tpm);
  j["tfm"] = overrides_json(cfg.tfm);
  j["dataset"] = cfg.dataset;
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

DatasetManifest load_manifest(const std::string& path) {
  const json j = parse_json(read_file(path), path);
  if (!j.is_object()) throw Error(path + ": expected a JSON object");
  require_keys(j, {"name", "scale", "hr", "lr"}, "$");
  for (const char* key : {"name", "scale", "hr"})
    if (!j.contains(key)) throw Error(std::string("$.") + key + ": missing required key");

  DatasetManifest m;
  m.name = get_string(j["name"], "$.name");
  m.scale = get_count(j["scale"], "$.scale");

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve_list = [&](const json& arr, const std::string& jpath) {
    if (!arr.is_array() || arr.empty()) throw Error(jpath + ": expected a non-empty array");
    std::vector<std::string> out;
    for (size_t i = 0; i < arr.size(); ++i) {
      std::filesystem::path p = get_string(arr[i], jpath + "[" + std::to_string(i) + "]");
      if (p.is_relative()) p = base / p;
      p = p.lexically_normal();
      if (!std::filesystem::exists(p))
        throw Error(jpath + "[" + std::to_string(i) + "]: no such file: " + p.string());
      out.push_back(p.string());
    }
    return out;
  };

  m.hr = resolve_list(j["hr"], "$.hr");
  if (j.contains("lr")) {
    m.lr = resolve_list(j["lr"], "$.lr");
    if (m.lr.size() != m.hr.size())
      throw Error("$.lr: " + std::to_string(m.lr.size()) + " entries but $.hr has " +
                  std::to_string(m.hr.size()));
    for (size_t i = 0; i < m.hr.size(); ++i) {
      const ImageDims hd = probe_image_dims(m.hr[i]);
      const ImageDims ld = probe_image_dims(m.lr[i]);
      if (hd.width % m.scale != 0 || hd.height % m.scale != 0 ||
          ld.width != hd.width / m.scale || ld.height != hd.height / m.scale)
        throw Error("$.lr[" + std::to_string(i) + "]: dims " + std::to_string(ld.width) + "x" +
                    std::to_string(ld.height) + " do not match HR/" + std::to_string(m.scale));
    }
  }
  return m;
}

}  // namespace wtsr
