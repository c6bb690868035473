#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wtsr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Worker cap for internal parallel loops. Reads WTSR_THREADS once; falls
/// back to the OpenMP default (1 when built without OpenMP).
inline int thread_count() {
  static const int n = [] {
    int hw = 1;
#ifdef _OPENMP
    hw = omp_get_max_threads();
#endif
    if (const char* env = std::getenv("WTSR_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) hw = static_cast<int>(std::min<long>(v, 1024));
    }
    return hw;
  }();
  return n;
}

struct Shape {
  int64_t n = 0, c = 0, h = 0, w = 0;

  bool operator==(const Shape&) const = default;
  int64_t elems() const { return n * c * h * w; }

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }
};

/// Rank-4 tensor (batch, channel, height, width), contiguous row-major.
/// Element (i,j,y,x) lives at ((i*c + j)*h + y)*w + x. Element type is
/// float for training/inference and double in oracle/test builds.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  TensorT(int64_t n, int64_t c, int64_t h, int64_t w) : shape_{n, c, h, w} {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw Error("tensor: all shape components must be >= 1, got " + shape_.str());
    data_.assign(static_cast<size_t>(shape_.elems()), T(0));
  }

  explicit TensorT(const Shape& s) : TensorT(s.n, s.c, s.h, s.w) {}

  static TensorT full(const Shape& s, T v) {
    TensorT t(s);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static TensorT zeros_like(const TensorT& o) { return TensorT(o.shape_); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int64_t i, int64_t j, int64_t y, int64_t x) {
    return data_[static_cast<size_t>(((i * shape_.c + j) * shape_.h + y) * shape_.w + x)];
  }
  const T& at(int64_t i, int64_t j, int64_t y, int64_t x) const {
    return data_[static_cast<size_t>(((i * shape_.c + j) * shape_.h + y) * shape_.w + x)];
  }

  /// Pointer to the start of one (image, channel) plane.
  T* plane(int64_t i, int64_t j) {
    return data_.data() + static_cast<size_t>((i * shape_.c + j) * shape_.h * shape_.w);
  }
  const T* plane(int64_t i, int64_t j) const {
    return data_.data() + static_cast<size_t>((i * shape_.c + j) * shape_.h * shape_.w);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void clamp(T lo, T hi) {
    for (T& v : data_) v = std::min(hi, std::max(lo, v));
  }

  template <typename U>
  TensorT<U> astype() const {
    TensorT<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  bool same_bits(const TensorT& o) const {
    return shape_ == o.shape_ &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(T)) == 0;
  }

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!(a.shape() == b.shape()))
    throw Error("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
void add_inplace(TensorT<T>& a, const TensorT<T>& b) {
  if (!(a.shape() == b.shape()))
    throw Error("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// ---------------------------------------------------------------------------
// conv2d

/// 2D convolution (cross-correlation), stride 1, zero padding of `pad`
/// pixels on all sides. weight is (outC, inC, kH, kW). Each output element
/// is accumulated by exactly one worker in a fixed (inC, kH, kW) order, so
/// results are bit-identical across runs and thread counts.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  std::span<const T> bias, int64_t pad) {
  const Shape in = input.shape();
  const Shape ws = weight.shape();
  if (in.c != ws.c)
    throw Error("conv2d: input channels do not match kernel input channels; input " +
                in.str() + ", kernel " + ws.str());
  if (!bias.empty() && static_cast<int64_t>(bias.size()) != ws.n)
    throw Error("conv2d: bias length " + std::to_string(bias.size()) +
                " does not match output channels " + std::to_string(ws.n));
  if (pad < 0) throw Error("conv2d: negative padding");
  const int64_t oh = in.h + 2 * pad - ws.h + 1;
  const int64_t ow = in.w + 2 * pad - ws.w + 1;
  if (oh < 1 || ow < 1)
    throw Error("conv2d: kernel " + ws.str() + " larger than padded input " + in.str());

  TensorT<T> out(in.n, ws.n, oh, ow);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_count())
#endif
  for (int64_t i = 0; i < in.n; ++i) {
    for (int64_t o = 0; o < ws.n; ++o) {
      T* outp = out.plane(i, o);
      const T b = bias.empty() ? T(0) : bias[static_cast<size_t>(o)];
      std::fill(outp, outp + oh * ow, b);
      for (int64_t c = 0; c < ws.c; ++c) {
        const T* inp = input.plane(i, c);
        for (int64_t ky = 0; ky < ws.h; ++ky) {
          for (int64_t kx = 0; kx < ws.w; ++kx) {
            const T wv = weight.at(o, c, ky, kx);
            const int64_t y0 = std::max<int64_t>(0, pad - ky);
            const int64_t y1 = std::min<int64_t>(oh, in.h + pad - ky);
            const int64_t x0 = std::max<int64_t>(0, pad - kx);
            const int64_t x1 = std::min<int64_t>(ow, in.w + pad - kx);
            for (int64_t y = y0; y < y1; ++y) {
              const T* irow = inp + (y + ky - pad) * in.w + (kx - pad);
              T* orow = outp + y * ow;
              for (int64_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  TensorT<T> input;
  TensorT<T> weight;
  std::vector<T> bias;
};

/// Gradients of sum(grad_out * conv2d(input, weight, bias, pad)) with
/// respect to input, weight and bias.
template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                               const TensorT<T>& grad_out, int64_t pad) {
  const Shape in = input.shape();
  const Shape ws = weight.shape();
  const Shape gs = grad_out.shape();
  const int64_t oh = in.h + 2 * pad - ws.h + 1;
  const int64_t ow = in.w + 2 * pad - ws.w + 1;
  if (in.c != ws.c)
    throw Error("conv2d_backward: input channels do not match kernel; input " + in.str() +
                ", kernel " + ws.str());
  if (gs.n != in.n || gs.c != ws.n || gs.h != oh || gs.w != ow)
    throw Error("conv2d_backward: grad_out shape " + gs.str() + " inconsistent with forward output [" +
                std::to_string(in.n) + "," + std::to_string(ws.n) + "," + std::to_string(oh) + "," +
                std::to_string(ow) + "]");

  Conv2dGrads<T> g{TensorT<T>(in), TensorT<T>(ws), std::vector<T>(static_cast<size_t>(ws.n), T(0))};

  // grad wrt input: scatter grad_out rows through the kernel.
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_count())
#endif
  for (int64_t i = 0; i < in.n; ++i) {
    for (int64_t c = 0; c < in.c; ++c) {
      T* gip = g.input.plane(i, c);
      for (int64_t o = 0; o < ws.n; ++o) {
        const T* gop = grad_out.plane(i, o);
        for (int64_t ky = 0; ky < ws.h; ++ky) {
          for (int64_t kx = 0; kx < ws.w; ++kx) {
            const T wv = weight.at(o, c, ky, kx);
            const int64_t y0 = std::max<int64_t>(0, pad - ky);
            const int64_t y1 = std::min<int64_t>(oh, in.h + pad - ky);
            const int64_t x0 = std::max<int64_t>(0, pad - kx);
            const int64_t x1 = std::min<int64_t>(ow, in.w + pad - kx);
            for (int64_t y = y0; y < y1; ++y) {
              T* grow = gip + (y + ky - pad) * in.w + (kx - pad);
              const T* gorow = gop + y * ow;
              for (int64_t x = x0; x < x1; ++x) grow[x] += wv * gorow[x];
            }
          }
        }
      }
    }
  }

  // grad wrt weight and bias.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (int64_t o = 0; o < ws.n; ++o) {
    for (int64_t i = 0; i < in.n; ++i) {
      const T* gop = grad_out.plane(i, o);
      for (int64_t c = 0; c < in.c; ++c) {
        const T* inp = input.plane(i, c);
        for (int64_t ky = 0; ky < ws.h; ++ky) {
          for (int64_t kx = 0; kx < ws.w; ++kx) {
            const int64_t y0 = std::max<int64_t>(0, pad - ky);
            const int64_t y1 = std::min<int64_t>(oh, in.h + pad - ky);
            const int64_t x0 = std::max<int64_t>(0, pad - kx);
            const int64_t x1 = std::min<int64_t>(ow, in.w + pad - kx);
            T acc = 0;
            for (int64_t y = y0; y < y1; ++y) {
              const T* irow = inp + (y + ky - pad) * in.w + (kx - pad);
              const T* gorow = gop + y * ow;
              for (int64_t x = x0; x < x1; ++x) acc += irow[x] * gorow[x];
            }
            g.weight.at(o, c, ky, kx) += acc;
          }
        }
      }
      T bacc = 0;
      for (int64_t k = 0; k < oh * ow; ++k) bacc += gop[k];
      g.bias[static_cast<size_t>(o)] += bacc;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// global average pooling

/// Mean over each (h,w) plane -> (n,c,1,1). Sums are accumulated in double.
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  const Shape s = x.shape();
  TensorT<T> out(s.n, s.c, 1, 1);
  const int64_t plane = s.h * s.w;
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < s.c; ++j) {
      const T* p = x.plane(i, j);
      double acc = 0;
      for (int64_t k = 0; k < plane; ++k) acc += static_cast<double>(p[k]);
      out.at(i, j, 0, 0) = static_cast<T>(acc / static_cast<double>(plane));
    }
  }
  return out;
}

/// Backward of global_avg_pool: distributes grad/(h*w) uniformly.
template <typename T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& grad_out, int64_t h, int64_t w) {
  const Shape s = grad_out.shape();
  if (s.h != 1 || s.w != 1)
    throw Error("global_avg_pool_backward: grad_out must be (n,c,1,1), got " + s.str());
  TensorT<T> out(s.n, s.c, h, w);
  const T inv = static_cast<T>(1.0 / static_cast<double>(h * w));
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < s.c; ++j) {
      const T v = grad_out.at(i, j, 0, 0) * inv;
      T* p = out.plane(i, j);
      std::fill(p, p + h * w, v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// pixel shuffle

/// (n, c*r^2, h, w) -> (n, c, r*h, r*w):
/// out(i, j, y, x) = in(i, j*r^2 + (y%r)*r + (x%r), y/r, x/r).
template <typename T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int64_t r) {
  const Shape s = x.shape();
  if (r < 1 || s.c % (r * r) != 0)
    throw Error("pixel_shuffle: channel count of " + s.str() + " not divisible by r^2 (r=" +
                std::to_string(r) + ")");
  const int64_t c = s.c / (r * r);
  TensorT<T> out(s.n, c, s.h * r, s.w * r);
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      for (int64_t dy = 0; dy < r; ++dy) {
        for (int64_t dx = 0; dx < r; ++dx) {
          const T* inp = x.plane(i, j * r * r + dy * r + dx);
          T* outp = out.plane(i, j);
          for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x2 = 0; x2 < s.w; ++x2)
              outp[(y * r + dy) * (s.w * r) + x2 * r + dx] = inp[y * s.w + x2];
        }
      }
    }
  }
  return out;
}

/// Exact inverse of pixel_shuffle; also its backward map.
template <typename T>
TensorT<T> pixel_unshuffle(const TensorT<T>& x, int64_t r) {
  const Shape s = x.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0)
    throw Error("pixel_unshuffle: spatial dims of " + s.str() + " not divisible by r=" +
                std::to_string(r));
  const int64_t h = s.h / r, w = s.w / r;
  TensorT<T> out(s.n, s.c * r * r, h, w);
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < s.c; ++j) {
      const T* inp = x.plane(i, j);
      for (int64_t dy = 0; dy < r; ++dy) {
        for (int64_t dx = 0; dx < r; ++dx) {
          T* outp = out.plane(i, j * r * r + dy * r + dx);
          for (int64_t y = 0; y < h; ++y)
            for (int64_t x2 = 0; x2 < w; ++x2)
              outp[y * w + x2] = inp[(y * r + dy) * s.w + x2 * r + dx];
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// channel concat / split

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw Error("concat_channels: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
  TensorT<T> out(sa.n, sa.c + sb.c, sa.h, sa.w);
  const size_t pa = static_cast<size_t>(sa.c * sa.h * sa.w);
  const size_t pb = static_cast<size_t>(sb.c * sb.h * sb.w);
  for (int64_t i = 0; i < sa.n; ++i) {
    std::memcpy(out.plane(i, 0), a.plane(i, 0), pa * sizeof(T));
    std::memcpy(out.plane(i, sa.c), b.plane(i, 0), pb * sizeof(T));
  }
  return out;
}

/// Splits channels at `c_first`; backward of concat_channels.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> split_channels(const TensorT<T>& x, int64_t c_first) {
  const Shape s = x.shape();
  if (c_first < 1 || c_first >= s.c)
    throw Error("split_channels: split point " + std::to_string(c_first) +
                " out of range for " + s.str());
  TensorT<T> a(s.n, c_first, s.h, s.w), b(s.n, s.c - c_first, s.h, s.w);
  const size_t pa = static_cast<size_t>(c_first * s.h * s.w);
  const size_t pb = static_cast<size_t>((s.c - c_first) * s.h * s.w);
  for (int64_t i = 0; i < s.n; ++i) {
    std::memcpy(a.plane(i, 0), x.plane(i, 0), pa * sizeof(T));
    std::memcpy(b.plane(i, 0), x.plane(i, c_first), pb * sizeof(T));
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// activations

enum class Act { Relu, Sigmoid };

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

/// d/dx relu at the saved *input*; the subgradient at 0 is taken as 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& input) {
  if (!(grad_out.shape() == input.shape()))
    throw Error("relu_backward: shape mismatch " + grad_out.shape().str() + " vs " +
                input.shape().str());
  TensorT<T> out(input.shape());
  for (int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return out;
}

/// Takes the saved *output* y = sigmoid(x): dy/dx = y*(1-y).
template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& grad_out, const TensorT<T>& output) {
  if (!(grad_out.shape() == output.shape()))
    throw Error("sigmoid_backward: shape mismatch " + grad_out.shape().str() + " vs " +
                output.shape().str());
  TensorT<T> out(output.shape());
  for (int64_t i = 0; i < output.size(); ++i)
    out[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  return out;
}

template <typename T>
TensorT<T> activation(const TensorT<T>& x, Act kind) {
  return kind == Act::Relu ? relu(x) : sigmoid(x);
}

// ---------------------------------------------------------------------------
// bicubic resize (imresize convention)

namespace detail {

/// Keys cubic kernel with a = -0.5.
inline double cubic_keys(double x) {
  x = std::abs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

struct ResampleTap {
  int64_t idx;
  double w;
};

/// Per-output-position taps for one dimension. When antialiasing a
/// downscale the kernel is widened by 1/scale. Weights are normalized to
/// sum 1 before source indices are clamped to the edge.
inline std::vector<std::vector<ResampleTap>> resample_taps(int64_t in, int64_t out,
                                                           bool antialias) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double kscale = (antialias && scale < 1.0) ? scale : 1.0;
  const double width = 4.0 / kscale;
  const int64_t ntaps = static_cast<int64_t>(std::ceil(width)) + 2;

  std::vector<std::vector<ResampleTap>> taps(static_cast<size_t>(out));
  for (int64_t i = 0; i < out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const int64_t left = static_cast<int64_t>(std::floor(u - width / 2.0));
    auto& row = taps[static_cast<size_t>(i)];
    row.reserve(static_cast<size_t>(ntaps));
    double sum = 0.0;
    for (int64_t p = 0; p < ntaps; ++p) {
      const int64_t idx = left + p;
      const double w = kscale * cubic_keys(kscale * (u - static_cast<double>(idx)));
      row.push_back({idx, w});
      sum += w;
    }
    for (auto& t : row) {
      t.w /= sum;
      t.idx = std::min<int64_t>(in - 1, std::max<int64_t>(0, t.idx));
    }
  }
  return taps;
}

}  // namespace detail

/// Separable cubic resampling (kernel a = -0.5), clamp-to-edge borders.
/// With `antialias` set, downscales widen the kernel support by the scale
/// factor, matching the convention used for SR benchmark degradation.
template <typename T>
TensorT<T> resize_bicubic(const TensorT<T>& x, int64_t out_h, int64_t out_w, bool antialias) {
  const Shape s = x.shape();
  if (out_h < 1 || out_w < 1) throw Error("resize_bicubic: output dims must be >= 1");
  if (out_h == s.h && out_w == s.w) return x;

  const auto ytaps = detail::resample_taps(s.h, out_h, antialias);
  const auto xtaps = detail::resample_taps(s.w, out_w, antialias);

  // Height pass, then width pass; accumulation in double.
  TensorT<T> mid(s.n, s.c, out_h, s.w);
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < s.c; ++j) {
      const T* inp = x.plane(i, j);
      T* midp = mid.plane(i, j);
      for (int64_t y = 0; y < out_h; ++y) {
        for (int64_t x2 = 0; x2 < s.w; ++x2) {
          double acc = 0.0;
          for (const auto& t : ytaps[static_cast<size_t>(y)])
            acc += t.w * static_cast<double>(inp[t.idx * s.w + x2]);
          midp[y * s.w + x2] = static_cast<T>(acc);
        }
      }
    }
  }

  TensorT<T> out(s.n, s.c, out_h, out_w);
  for (int64_t i = 0; i < s.n; ++i) {
    for (int64_t j = 0; j < s.c; ++j) {
      const T* midp = mid.plane(i, j);
      T* outp = out.plane(i, j);
      for (int64_t y = 0; y < out_h; ++y) {
        const T* mrow = midp + y * s.w;
        T* orow = outp + y * out_w;
        for (int64_t x2 = 0; x2 < out_w; ++x2) {
          double acc = 0.0;
          for (const auto& t : xtaps[static_cast<size_t>(x2)])
            acc += t.w * static_cast<double>(mrow[t.idx]);
          orow[x2] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace wtsr
