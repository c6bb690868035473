#pragma once

// Training configuration and dataset manifests. JSON in, strict about
// unknown keys so typos fail loudly instead of silently using defaults.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wtsr/network.hpp"

namespace wtsr {

// Per-network architecture overrides; unset fields keep the role defaults.
struct NetOverrides {
  std::optional<int64_t> feature_channels;
  std::optional<int64_t> n_groups;
  std::optional<int64_t> n_blocks_per_group;
  std::optional<int64_t> ca_reduction;

  bool operator==(const NetOverrides&) const = default;
  NetworkSpec apply(NetworkSpec base) const;
};

struct TrainConfig {
  int64_t scale = 3;
  int64_t patch = 48;  // LR patch edge; HR patches are scale times larger
  int64_t batch = 16;
  double lr = 1e-4;
  int64_t epochs_backbone = 200;
  int64_t epochs_tpm = 50;
  int64_t epochs_tfm = 200;
  int64_t patches_per_image_per_epoch = 16;
  uint64_t seed = 0;
  NetOverrides backbone;
  NetOverrides tpm;
  NetOverrides tfm;
  std::string dataset;  // manifest path
  std::string output_dir = "runs/default";

  bool operator==(const TrainConfig&) const = default;

  void validate() const;
  NetworkSpec backbone_spec() const;
  NetworkSpec tpm_spec() const;
  NetworkSpec tfm_spec() const;
};

// Strict parse: unknown keys and type mismatches are errors naming the
// JSON path; unset fields take the defaults above.
TrainConfig parse_config_text(const std::string& text, const std::string& origin);
TrainConfig parse_config(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);

// {name, scale, hr:[paths], lr:[paths]?}; paths resolve relative to the
// manifest file and must exist; LR dims must equal HR dims / scale.
struct DatasetManifest {
  std::string name;
  int64_t scale = 0;
  std::vector<std::string> hr;
  std::vector<std::string> lr;  // empty when the manifest lists none
};

DatasetManifest load_manifest(const std::string& path);

}  // namespace wtsr
