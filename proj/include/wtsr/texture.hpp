#pragma once

// Image-space derivations: luminance, Sobel edge maps, difference maps,
// bicubic degradation, and aligned patch extraction.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "wtsr/tensor.hpp"

namespace wtsr {

// Edge maps are [n,1,h,w] with values in [0,1]; zero on constant inputs.
template <typename T>
struct EdgeMapT {
  TensorT<T> data;
};
using EdgeMap = EdgeMapT<float>;

// Signed luminance difference, [n,1,h,w], unclipped.
template <typename T>
struct DiffMapT {
  TensorT<T> data;
};
using DiffMap = DiffMapT<float>;

// Aligned crop pair; hr origin is scale times the lr origin.
template <typename T>
struct PatchPairT {
  TensorT<T> lr_patch;
  TensorT<T> hr_patch;
  int64_t image_id = 0;
  int64_t y = 0;  // lr coordinates
  int64_t x = 0;
};
using PatchPair = PatchPairT<float>;

template <typename T>
TensorT<T> crop(const TensorT<T>& t, int64_t y0, int64_t x0, int64_t h, int64_t w) {
  const Shape s = t.shape();
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > s.h || x0 + w > s.w)
    throw Error("crop: region [" + std::to_string(y0) + "," + std::to_string(x0) + "," +
                std::to_string(h) + "," + std::to_string(w) + "] outside " + s.str());
  TensorT<T> out(s.n, s.c, h, w);
  for (int64_t i = 0; i < s.n; ++i)
    for (int64_t j = 0; j < s.c; ++j) {
      const T* src = t.plane(i, j);
      T* dst = out.plane(i, j);
      for (int64_t y = 0; y < h; ++y)
        std::copy(src + (y0 + y) * s.w + x0, src + (y0 + y) * s.w + x0 + w, dst + y * w);
    }
  return out;
}

// Largest top-left region whose dims are multiples of s.
template <typename T>
TensorT<T> crop_to_multiple(const TensorT<T>& t, int64_t s) {
  const Shape sh = t.shape();
  const int64_t h = (sh.h / s) * s;
  const int64_t w = (sh.w / s) * s;
  if (h == 0 || w == 0) throw Error("crop_to_multiple: " + sh.str() + " smaller than factor " + std::to_string(s));
  if (h == sh.h && w == sh.w) return t;
  return crop(t, 0, 0, h, w);
}

// BT.601 weights; math in double so white maps to 1.0f after the cast.
template <typename T>
TensorT<T> rgb_to_luma(const TensorT<T>& img) {
  const Shape s = img.shape();
  if (s.c != 3) throw Error("rgb_to_luma: expected 3 channels, got " + s.str());
  TensorT<T> out(s.n, 1, s.h, s.w);
  for (int64_t i = 0; i < s.n; ++i) {
    const T* r = img.plane(i, 0);
    const T* g = img.plane(i, 1);
    const T* b = img.plane(i, 2);
    T* y = out.plane(i, 0);
    const int64_t hw = s.h * s.w;
    for (int64_t k = 0; k < hw; ++k)
      y[k] = T(0.299 * double(r[k]) + 0.587 * double(g[k]) + 0.114 * double(b[k]));
  }
  return out;
}

// Standard 3x3 Sobel with replicate borders, magnitude scaled by 1/(4*sqrt(2))
// so inputs in [0,1] produce outputs in [0,1].
template <typename T>
EdgeMapT<T> sobel_magnitude(const TensorT<T>& luma) {
  const Shape s = luma.shape();
  if (s.c != 1) throw Error("sobel_magnitude: expected 1 channel, got " + s.str());
  if (s.h < 3 || s.w < 3) throw Error("sobel_magnitude: image smaller than 3x3: " + s.str());
  const double norm = 1.0 / (4.0 * std::sqrt(2.0));
  TensorT<T> out(s.n, 1, s.h, s.w);
  for (int64_t i = 0; i < s.n; ++i) {
    const T* p = luma.plane(i, 0);
    T* q = out.plane(i, 0);
    auto px = [&](int64_t y, int64_t x) {
      y = std::clamp<int64_t>(y, 0, s.h - 1);
      x = std::clamp<int64_t>(x, 0, s.w - 1);
      return double(p[y * s.w + x]);
    };
    for (int64_t y = 0; y < s.h; ++y)
      for (int64_t x = 0; x < s.w; ++x) {
        const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
        const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
        q[y * s.w + x] = T(std::sqrt(gx * gx + gy * gy) * norm);
      }
  }
  return EdgeMapT<T>{std::move(out)};
}

// luma(hr) - luma(output), signed and unclipped.
template <typename T>
DiffMapT<T> diff_map(const TensorT<T>& hr, const TensorT<T>& output) {
  if (!(hr.shape() == output.shape()))
    throw Error("diff_map: shape mismatch " + hr.shape().str() + " vs " + output.shape().str());
  TensorT<T> a = rgb_to_luma(hr);
  TensorT<T> b = rgb_to_luma(output);
  for (int64_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return DiffMapT<T>{std::move(a)};
}

// Antialiased bicubic downscale by 1/s, clamped back to [0,1].
template <typename T>
EdgeMapT<T> shrink_edge(const EdgeMapT<T>& edge, int64_t s) {
  const Shape sh = edge.data.shape();
  if (s < 1) throw Error("shrink_edge: factor must be positive");
  if (sh.h % s != 0 || sh.w % s != 0)
    throw Error("shrink_edge: dims of " + sh.str() + " not divisible by " + std::to_string(s));
  TensorT<T> out = resize_bicubic(edge.data, sh.h / s, sh.w / s, true);
  out.clamp(T(0), T(1));
  return EdgeMapT<T>{std::move(out)};
}

// Benchmark degradation: crop to a multiple of s, antialiased bicubic
// downscale by 1/s, clamp to [0,1].
template <typename T>
TensorT<T> degrade_bicubic(const TensorT<T>& hr, int64_t s) {
  if (s < 1) throw Error("degrade_bicubic: factor must be positive");
  TensorT<T> base = crop_to_multiple(hr, s);
  const Shape sh = base.shape();
  TensorT<T> out = resize_bicubic(base, sh.h / s, sh.w / s, true);
  out.clamp(T(0), T(1));
  return out;
}

// k random aligned crops: lr patch p x p at (y,x), hr patch s*p x s*p at
// (s*y, s*x). Origins drawn y then x from mt19937_64(seed) via modulo, so the
// sequence is identical across platforms.
template <typename T>
std::vector<PatchPairT<T>> extract_patch_pairs(const TensorT<T>& lr, const TensorT<T>& hr,
                                               int64_t p, int64_t s, uint64_t seed, int64_t k) {
  const Shape ls = lr.shape(), hs = hr.shape();
  if (ls.n != 1 || hs.n != 1) throw Error("extract_patch_pairs: expected single images");
  if (hs.h != ls.h * s || hs.w != ls.w * s)
    throw Error("extract_patch_pairs: hr " + hs.str() + " is not " + std::to_string(s) + "x lr " + ls.str());
  if (p < 1 || ls.h < p || ls.w < p)
    throw Error("extract_patch_pairs: patch " + std::to_string(p) + " exceeds lr " + ls.str());
  std::mt19937_64 rng(seed);
  std::vector<PatchPairT<T>> out;
  out.reserve(size_t(k));
  for (int64_t i = 0; i < k; ++i) {
    const int64_t y = int64_t(rng() % uint64_t(ls.h - p + 1));
    const int64_t x = int64_t(rng() % uint64_t(ls.w - p + 1));
    PatchPairT<T> pair;
    pair.lr_patch = crop(lr, y, x, p, p);
    pair.hr_patch = crop(hr, y * s, x * s, p * s, p * s);
    pair.y = y;
    pair.x = x;
    out.push_back(std::move(pair));
  }
  return out;
}

// Composite used by the CLI and the pipeline: luma (for RGB input) then Sobel.
template <typename T>
EdgeMapT<T> texture_map(const TensorT<T>& img) {
  if (img.shape().c == 3) return sobel_magnitude(rgb_to_luma(img));
  return sobel_magnitude(img);
}

}  // namespace wtsr
