#pragma once

// PSNR and SSIM on the luminance channel, and a benchmark runner that
// produces per-image and mean scores as JSON plus an aligned text table.

#include <cstdint>
#include <string>
#include <vector>

#include "wtsr/config.hpp"
#include "wtsr/pipeline.hpp"
#include "wtsr/tensor.hpp"

namespace wtsr {

// Benchmark luminance: 3-channel input converts with the video-range BT.601
// matrix (Y' = (65.481 R + 128.553 G + 24.966 B + 16) / 255), the protocol
// behind published super-resolution scores; 1-channel input is already the
// luminance plane and passes through untouched.
Tensor eval_luma(const Tensor& img);

// 10*log10(1/MSE) on luminance with `shave` border pixels removed on each
// side, capped at 99 dB (also the zero-MSE value).
double psnr(const Tensor& a, const Tensor& b, int64_t shave);

// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1=0.01,
// K2=0.03, dynamic range 1) on shaved luminance.
double ssim(const Tensor& a, const Tensor& b, int64_t shave);

struct ImageRecord {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct SkipRecord {
  std::string id;
  std::string reason;
};

struct EvalReport {
  std::string dataset;
  std::string method;
  int64_t scale = 0;
  int64_t shave = 0;
  std::vector<ImageRecord> images;
  std::vector<SkipRecord> skipped;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
};

enum class EvalMethod { bicubic, bundle, identity };
EvalMethod eval_method_from_name(const std::string& s);
const char* eval_method_name(EvalMethod m);

// HR images from the manifest; LR via degrade_bicubic; SR per the method
// (bicubic upscale, pipeline inference, or the HR itself for debugging).
// Unreadable images are skipped with a warning and noted in the report.
EvalReport evaluate_benchmark(EvalMethod method, const DatasetManifest& manifest, int64_t scale,
                              int64_t shave, PipelineBundle* bundle);

std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

}  // namespace wtsr
