#pragma once

// Staged training (backbone -> texture prediction -> texture fusion),
// end-to-end inference, and checkpoint persistence. Earlier stages stay
// frozen while later ones train.

#include <cstdint>
#include <string>
#include <vector>

#include "wtsr/config.hpp"
#include "wtsr/network.hpp"
#include "wtsr/texture.hpp"

namespace wtsr {

enum class Stage { rcan, tpm, tfm };

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& s);

struct StageCheckpoint {
  Stage stage = Stage::rcan;
  NetworkSpec spec;
  Network net;  // parameters and step count live here
  std::string config_snapshot;  // serialized TrainConfig JSON, "{}" when unknown
};

// On disk: 8-byte magic "WTSRCKPT", little-endian u64 JSON header length,
// UTF-8 JSON header (format_version, stage, spec, step_count, config,
// tensor manifest with name/shape/byte_offset), then packed little-endian
// float32 tensor data in manifest order. Writes go through a temp file and
// rename, so a crash never leaves a half-written checkpoint behind.
void save_checkpoint(const StageCheckpoint& ckpt, const std::string& path);
StageCheckpoint load_checkpoint(const std::string& path);

struct PipelineBundle {
  StageCheckpoint backbone;
  StageCheckpoint tpm;
  StageCheckpoint tfm;
  int64_t scale = 0;

  void validate() const;  // same scale everywhere, tpm 1->1, tfm 4->3
};

// Reads backbone.ckpt, tpm.ckpt, tfm.ckpt from a directory.
PipelineBundle load_bundle(const std::string& dir);

// One training image pair held in memory; LR comes from the manifest when
// listed, otherwise from degrade_bicubic.
struct TrainPair {
  Tensor lr;
  Tensor hr;  // cropped to a multiple of the scale
  std::string id;
};
std::vector<TrainPair> load_training_pairs(const TrainConfig& cfg);

// Full-resolution (HR) supervision pair for the texture prediction stage.
struct TpmSample {
  EdgeMap input;   // sobel(luma(F_RCAN(lr)))
  DiffMap target;  // luma(hr) - luma(F_RCAN(lr))
};

StageCheckpoint train_backbone(const TrainConfig& cfg);
std::vector<TpmSample> build_tpm_dataset(StageCheckpoint& backbone, const TrainConfig& cfg);
StageCheckpoint train_tpm(const std::vector<TpmSample>& pairs, const TrainConfig& cfg);
StageCheckpoint train_tfm(const TrainConfig& cfg, StageCheckpoint& backbone, StageCheckpoint& tpm);

// I_4_LR: concat(lr, shrink(clamp(F_TPM(sobel(luma(F_RCAN(lr)))), 0, 1))).
Tensor build_fused_input(const Tensor& lr, Network& backbone, Network& tpm, int64_t scale);

// I_SR = F_TFM(I_4_LR), clamped to [0,1] at the very end only.
Tensor infer(PipelineBundle& bundle, const Tensor& lr);

}  // namespace wtsr
