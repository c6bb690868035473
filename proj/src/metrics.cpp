#include "wtsr/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "wtsr/image_io.hpp"
#include "wtsr/texture.hpp"

namespace wtsr {

namespace {

constexpr double kPsnrCap = 99.0;

// Shaved luminance plane in double precision.
struct LumaPlane {
  std::vector<double> y;
  int64_t h = 0;
  int64_t w = 0;
};

LumaPlane shaved_luma(const Tensor& img, int64_t shave, const char* op) {
  const Shape s = img.shape();
  if (s.n != 1) throw Error(std::string(op) + ": expected a single image, got " + s.str());
  if (s.c != 1 && s.c != 3)
    throw Error(std::string(op) + ": expected 1 or 3 channels, got " + s.str());
  if (shave < 0 || s.h - 2 * shave < 1 || s.w - 2 * shave < 1)
    throw Error(std::string(op) + ": shave " + std::to_string(shave) + " too large for " + s.str());

  LumaPlane out;
  out.h = s.h - 2 * shave;
  out.w = s.w - 2 * shave;
  out.y.resize(size_t(out.h * out.w));
  for (int64_t yy = 0; yy < out.h; ++yy)
    for (int64_t xx = 0; xx < out.w; ++xx) {
      const int64_t sy = yy + shave, sx = xx + shave;
      double v;
      if (s.c == 1) {
        v = double(img.at(0, 0, sy, sx));
      } else {
        const double r = double(img.at(0, 0, sy, sx));
        const double g = double(img.at(0, 1, sy, sx));
        const double b = double(img.at(0, 2, sy, sx));
        v = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0;
      }
      out.y[size_t(yy * out.w + xx)] = v;
    }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw Error(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                b.shape().str());
}

}  // namespace

Tensor eval_luma(const Tensor& img) {
  const Shape s = img.shape();
  if (s.c == 1) return img;
  if (s.c != 3) throw Error("eval_luma: expected 1 or 3 channels, got " + s.str());
  Tensor out(s.n, 1, s.h, s.w);
  for (int64_t i = 0; i < s.n; ++i) {
    const float* r = img.plane(i, 0);
    const float* g = img.plane(i, 1);
    const float* b = img.plane(i, 2);
    float* y = out.plane(i, 0);
    for (int64_t k = 0; k < s.h * s.w; ++k)
      y[k] = float((65.481 * double(r[k]) + 128.553 * double(g[k]) + 24.966 * double(b[k]) + 16.0) /
                   255.0);
  }
  return out;
}

double psnr(const Tensor& a, const Tensor& b, int64_t shave) {
  require_same_shape(a, b, "psnr");
  const LumaPlane pa = shaved_luma(a, shave, "psnr");
  const LumaPlane pb = shaved_luma(b, shave, "psnr");
  double sum = 0.0;
  for (size_t i = 0; i < pa.y.size(); ++i) {
    const double d = pa.y[i] - pb.y[i];
    sum += d * d;
  }
  const double mse = sum / double(pa.y.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b, int64_t shave) {
  require_same_shape(a, b, "ssim");
  const LumaPlane pa = shaved_luma(a, shave, "ssim");
  const LumaPlane pb = shaved_luma(b, shave, "ssim");
  constexpr int64_t kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  if (pa.h < kWin || pa.w < kWin)
    throw Error("ssim: image smaller than the 11x11 window after shaving (" +
                std::to_string(pa.w) + "x" + std::to_string(pa.h) + ")");

  double window[kWin * kWin];
  double wsum = 0.0;
  for (int64_t dy = 0; dy < kWin; ++dy)
    for (int64_t dx = 0; dx < kWin; ++dx) {
      const double ry = double(dy - 5), rx = double(dx - 5);
      const double v = std::exp(-(ry * ry + rx * rx) / (2.0 * kSigma * kSigma));
      window[dy * kWin + dx] = v;
      wsum += v;
    }
  for (double& v : window) v /= wsum;

  double total = 0.0;
  int64_t count = 0;
  for (int64_t y0 = 0; y0 + kWin <= pa.h; ++y0)
    for (int64_t x0 = 0; x0 + kWin <= pa.w; ++x0) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int64_t dy = 0; dy < kWin; ++dy)
        for (int64_t dx = 0; dx < kWin; ++dx) {
          const double wgt = window[dy * kWin + dx];
          const double va = pa.y[size_t((y0 + dy) * pa.w + (x0 + dx))];
          const double vb = pb.y[size_t((y0 + dy) * pb.w + (x0 + dx))];
          mx += wgt * va;
          my += wgt * vb;
          mxx += wgt * va * va;
          myy += wgt * vb * vb;
          mxy += wgt * va * vb;
        }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cxy = mxy - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total += num / den;
      ++count;
    }
  return total / double(count);
}

EvalMethod eval_method_from_name(const std::string& s) {
  if (s == "bicubic") return EvalMethod::bicubic;
  if (s == "bundle") return EvalMethod::bundle;
  if (s == "identity") return EvalMethod::identity;
  throw Error("unknown eval method '" + s + "' (expected bicubic, bundle, or identity)");
}

const char* eval_method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::bicubic: return "bicubic";
    case EvalMethod::bundle: return "bundle";
    case EvalMethod::identity: return "identity";
  }
  return "?";
}

EvalReport evaluate_benchmark(EvalMethod method, const DatasetManifest& manifest, int64_t scale,
                              int64_t shave, PipelineBundle* bundle) {
  if (method == EvalMethod::bundle) {
    if (!bundle) throw Error("evaluate_benchmark: bundle method requires a loaded bundle");
    if (bundle->scale != scale)
      throw Error("evaluate_benchmark: bundle scale " + std::to_string(bundle->scale) +
                  " != requested scale " + std::to_string(scale));
  }

  EvalReport report;
  report.dataset = manifest.name;
  report.method = eval_method_name(method);
  report.scale = scale;
  report.shave = shave;

  for (const std::string& path : manifest.hr) {
    const std::string id = std::filesystem::path(path).stem().string();
    try {
      Tensor hr = crop_to_multiple(load_image_tensor(path), scale);
      Tensor sr;
      if (method == EvalMethod::identity) {
        sr = hr;
      } else {
        Tensor lr = degrade_bicubic(hr, scale);
        if (method == EvalMethod::bicubic) {
          sr = resize_bicubic(lr, hr.shape().h, hr.shape().w, false);
          sr.clamp(0.0f, 1.0f);
        } else {
          sr = infer(*bundle, lr);
        }
      }
      ImageRecord rec;
      rec.id = id;
      rec.psnr_db = psnr(sr, hr, shave);
      rec.ssim = ssim(sr, hr, shave);
      report.images.push_back(std::move(rec));
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << id << ": " << e.what() << "\n";
      report.skipped.push_back(SkipRecord{id, e.what()});
    }
  }

  if (report.images.empty()) throw Error("evaluate_benchmark: no images evaluated");
  double psum = 0.0, ssum = 0.0;
  for (const auto& rec : report.images) {
    psum += rec.psnr_db;
    ssum += rec.ssim;
  }
  report.mean_psnr_db = psum / double(report.images.size());
  report.mean_ssim = ssum / double(report.images.size());
  return report;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["scale"] = r.scale;
  j["shave"] = r.shave;
  j["images"] = nlohmann::json::array();
  for (const auto& rec : r.images)
    j["images"].push_back({{"id", rec.id}, {"psnr_db", rec.psnr_db}, {"ssim", rec.ssim}});
  j["skipped"] = nlohmann::json::array();
  for (const auto& rec : r.skipped)
    j["skipped"].push_back({{"id", rec.id}, {"reason", rec.reason}});
  j["mean_psnr_db"] = r.mean_psnr_db;
  j["mean_ssim"] = r.mean_ssim;
  return j.dump(2);
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  out << r.dataset << " x" << r.scale << " (" << r.method << ", shave " << r.shave << ")\n";

  size_t width = 8;
  for (const auto& rec : r.images) width = std::max(width, rec.id.size() + 2);
  auto cell = [&](const std::string& s) {
    out << s;
    for (size_t i = s.size(); i < width; ++i) out << ' ';
  };
  auto num = [&](double v, int prec) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    cell(buf);
  };

  cell("");
  for (const auto& rec : r.images) cell(rec.id);
  cell("mean");
  out << "\n";
  cell("PSNR");
  for (const auto& rec : r.images) num(rec.psnr_db, 2);
  num(r.mean_psnr_db, 2);
  out << "\n";
  cell("SSIM");
  for (const auto& rec : r.images) num(rec.ssim, 4);
  num(r.mean_ssim, 4);
  out << "\n";
  if (!r.skipped.empty()) {
    out << "skipped:";
    for (const auto& rec : r.skipped) out << " " << rec.id;
    out << "\n";
  }
  return out.str();
}

}  // namespace wtsr
