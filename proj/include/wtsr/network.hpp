#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wtsr/tensor.hpp"

namespace wtsr {

enum class NetworkRole { Backbone, TexturePredictor, TextureFusion };

inline const char* role_name(NetworkRole r) {
  switch (r) {
    case NetworkRole::Backbone: return "backbone";
    case NetworkRole::TexturePredictor: return "texture_predictor";
    case NetworkRole::TextureFusion: return "texture_fusion";
  }
  return "?";
}

inline NetworkRole role_from_name(const std::string& s) {
  if (s == "backbone") return NetworkRole::Backbone;
  if (s == "texture_predictor") return NetworkRole::TexturePredictor;
  if (s == "texture_fusion") return NetworkRole::TextureFusion;
  throw Error("unknown network role '" + s + "'");
}

/// Architecture description for one of the three sub-networks. The
/// factories give the full-scale layouts; feature_channels, group/block
/// counts and ca_reduction stay overridable for desk-scale runs.
struct NetworkSpec {
  NetworkRole role = NetworkRole::Backbone;
  int64_t in_channels = 3;
  int64_t out_channels = 3;
  int64_t feature_channels = 64;
  int64_t n_groups = 10;
  int64_t n_blocks_per_group = 10;
  int64_t ca_reduction = 16;
  int64_t scale = 3;  // upscale factor, 1 when there is no upscaler
  bool has_upscaler = true;

  bool operator==(const NetworkSpec&) const = default;

  static NetworkSpec backbone(int64_t scale) {
    return {NetworkRole::Backbone, 3, 3, 64, 10, 10, 16, scale, true};
  }
  static NetworkSpec texture_predictor() {
    return {NetworkRole::TexturePredictor, 1, 1, 64, 2, 10, 16, 1, false};
  }
  static NetworkSpec texture_fusion(int64_t scale) {
    return {NetworkRole::TextureFusion, 4, 3, 64, 10, 10, 16, scale, true};
  }

  void validate() const {
    if (in_channels < 1 || out_channels < 1 || feature_channels < 1 || n_groups < 1 ||
        n_blocks_per_group < 1 || ca_reduction < 1)
      throw Error("network spec: all counts must be positive");
    if (feature_channels % ca_reduction != 0)
      throw Error("network spec: feature_channels (" + std::to_string(feature_channels) +
                  ") not divisible by ca_reduction (" + std::to_string(ca_reduction) + ")");
    if (has_upscaler) {
      if (scale < 2 || scale > 4)
        throw Error("network spec: upscaler requires scale in {2,3,4}, got " +
                    std::to_string(scale));
    } else if (scale != 1) {
      throw Error("network spec: scale must be 1 without an upscaler, got " +
                  std::to_string(scale));
    }
    switch (role) {
      case NetworkRole::Backbone:
        if (in_channels != 3 || out_channels != 3 || !has_upscaler)
          throw Error("network spec: backbone must be 3->3 with an upscaler");
        break;
      case NetworkRole::TexturePredictor:
        if (in_channels != 1 || out_channels != 1 || has_upscaler)
          throw Error("network spec: texture predictor must be 1->1 without an upscaler");
        break;
      case NetworkRole::TextureFusion:
        if (in_channels != 4 || out_channels != 3 || !has_upscaler)
          throw Error("network spec: texture fusion must be 4->3 with an upscaler");
        break;
    }
  }
};

/// A trainable tensor plus its additively accumulated gradient.
template <typename T>
struct GradPairT {
  TensorT<T> value;
  TensorT<T> grad;

  explicit GradPairT() = default;
  explicit GradPairT(const Shape& s) : value(s), grad(s) {}

  void reset_grad() { grad.fill(T(0)); }
};

using GradPair = GradPairT<float>;

template <typename T>
struct ParamRefT {
  std::string name;
  GradPairT<T>* param;
};

namespace detail {

/// y(i,j,:,:) = x(i,j,:,:) * g(i,j,0,0)
template <typename T>
TensorT<T> channel_scale(const TensorT<T>& x, const TensorT<T>& g) {
  const Shape s = x.shape();
  TensorT<T> out(s);
  for (int64_t i = 0; i < s.n; ++i)
    for (int64_t j = 0; j < s.c; ++j) {
      const T v = g.at(i, j, 0, 0);
      const T* p = x.plane(i, j);
      T* q = out.plane(i, j);
      for (int64_t k = 0; k < s.h * s.w; ++k) q[k] = p[k] * v;
    }
  return out;
}

/// out(i,j,0,0) = sum over the plane of a(i,j,:,:) * b(i,j,:,:)
template <typename T>
TensorT<T> channel_dot(const TensorT<T>& a, const TensorT<T>& b) {
  const Shape s = a.shape();
  TensorT<T> out(s.n, s.c, 1, 1);
  for (int64_t i = 0; i < s.n; ++i)
    for (int64_t j = 0; j < s.c; ++j) {
      const T* p = a.plane(i, j);
      const T* q = b.plane(i, j);
      T acc = 0;
      for (int64_t k = 0; k < s.h * s.w; ++k) acc += p[k] * q[k];
      out.at(i, j, 0, 0) = acc;
    }
  return out;
}

}  // namespace detail

template <typename T>
struct Conv2dLayer {
  GradPairT<T> weight;  // (outC, inC, k, k)
  GradPairT<T> bias;    // stored as (1, outC, 1, 1)
  int64_t pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t oc, int64_t ic, int64_t k)
      : weight(Shape{oc, ic, k, k}), bias(Shape{1, oc, 1, 1}), pad((k - 1) / 2) {}

  std::span<const T> bias_span() const {
    return {bias.value.data(), static_cast<size_t>(bias.value.shape().c)};
  }

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    if (record) {
      saved_input_ = x;
      recorded_ = true;
    }
    return conv2d<T>(x, weight.value, bias_span(), pad);
  }

  TensorT<T> backward(const TensorT<T>& grad_out) {
    if (!recorded_) throw Error("conv layer: backward without a recorded forward");
    auto g = conv2d_backward<T>(saved_input_, weight.value, grad_out, pad);
    add_inplace(weight.grad, g.weight);
    for (int64_t o = 0; o < bias.grad.shape().c; ++o)
      bias.grad.at(0, o, 0, 0) += g.bias[static_cast<size_t>(o)];
    recorded_ = false;
    return std::move(g.input);
  }

 private:
  TensorT<T> saved_input_;
  bool recorded_ = false;
};

/// Channel attention: x * sigmoid(W2 relu(W1 avgpool(x))) with a C/r
/// bottleneck of 1x1 convolutions.
template <typename T>
struct CaLayer {
  Conv2dLayer<T> down, up;

  CaLayer() = default;
  CaLayer(int64_t channels, int64_t reduction)
      : down(channels / reduction, channels, 1), up(channels, channels / reduction, 1) {}

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    TensorT<T> pooled = global_avg_pool(x);
    TensorT<T> a = down.forward(pooled, record);
    TensorT<T> b = relu(a);
    TensorT<T> c = up.forward(b, record);
    TensorT<T> gate = sigmoid(c);
    TensorT<T> y = detail::channel_scale(x, gate);
    if (record) {
      saved_input_ = x;
      saved_preact_ = std::move(a);
      saved_gate_ = std::move(gate);
      recorded_ = true;
      return y;
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) {
    if (!recorded_) throw Error("ca layer: backward without a recorded forward");
    const Shape s = saved_input_.shape();
    TensorT<T> grad_x = detail::channel_scale(grad_out, saved_gate_);
    TensorT<T> grad_gate = detail::channel_dot(grad_out, saved_input_);
    TensorT<T> grad_c = sigmoid_backward(grad_gate, saved_gate_);
    TensorT<T> grad_b = up.backward(grad_c);
    TensorT<T> grad_a = relu_backward(grad_b, saved_preact_);
    TensorT<T> grad_pooled = down.backward(grad_a);
    TensorT<T> grad_from_pool = global_avg_pool_backward(grad_pooled, s.h, s.w);
    add_inplace(grad_x, grad_from_pool);
    recorded_ = false;
    return grad_x;
  }

 private:
  TensorT<T> saved_input_, saved_preact_, saved_gate_;
  bool recorded_ = false;
};

/// Residual channel attention block: x + CA(conv2(relu(conv1(x)))).
template <typename T>
struct Rcab {
  Conv2dLayer<T> conv1, conv2;
  CaLayer<T> ca;

  Rcab() = default;
  Rcab(int64_t channels, int64_t reduction)
      : conv1(channels, channels, 3), conv2(channels, channels, 3), ca(channels, reduction) {}

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    TensorT<T> t1 = conv1.forward(x, record);
    TensorT<T> t2 = relu(t1);
    TensorT<T> t3 = conv2.forward(t2, record);
    TensorT<T> t4 = ca.forward(t3, record);
    add_inplace(t4, x);
    if (record) {
      saved_preact_ = std::move(t1);
      recorded_ = true;
    }
    return t4;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) {
    if (!recorded_) throw Error("rcab: backward without a recorded forward");
    TensorT<T> g3 = ca.backward(grad_out);
    TensorT<T> g2 = conv2.backward(g3);
    TensorT<T> g1 = relu_backward(g2, saved_preact_);
    TensorT<T> gx = conv1.backward(g1);
    add_inplace(gx, grad_out);  // identity skip
    recorded_ = false;
    return gx;
  }

 private:
  TensorT<T> saved_preact_;
  bool recorded_ = false;
};

/// Residual group: x + conv(RCAB_b(...RCAB_1(x)...)), short skip across
/// the whole group.
template <typename T>
struct ResidualGroup {
  std::vector<Rcab<T>> blocks;
  Conv2dLayer<T> tail;

  ResidualGroup() = default;
  ResidualGroup(int64_t channels, int64_t n_blocks, int64_t reduction)
      : tail(channels, channels, 3) {
    blocks.reserve(static_cast<size_t>(n_blocks));
    for (int64_t i = 0; i < n_blocks; ++i) blocks.emplace_back(channels, reduction);
  }

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    TensorT<T> f = x;
    for (auto& b : blocks) f = b.forward(f, record);
    TensorT<T> y = tail.forward(f, record);
    add_inplace(y, x);
    recorded_ = record;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) {
    if (!recorded_) throw Error("residual group: backward without a recorded forward");
    TensorT<T> g = tail.backward(grad_out);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
    add_inplace(g, grad_out);  // short skip
    recorded_ = false;
    return g;
  }

 private:
  bool recorded_ = false;
};

/// One of the three sub-networks plus its Adam state. Layout:
///   head conv -> residual groups -> body conv (+ long skip from head)
///   -> [conv C -> C*s^2 + pixel_shuffle(s)] -> tail conv.
/// The texture predictor has no upscaler and runs at input resolution.
template <typename T>
class NetworkT {
 public:
  NetworkT() = default;

  static NetworkT build(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    NetworkT net;
    net.spec_ = spec;
    const int64_t C = spec.feature_channels;
    net.head_ = Conv2dLayer<T>(C, spec.in_channels, 3);
    net.groups_.reserve(static_cast<size_t>(spec.n_groups));
    for (int64_t g = 0; g < spec.n_groups; ++g)
      net.groups_.emplace_back(C, spec.n_blocks_per_group, spec.ca_reduction);
    net.body_ = Conv2dLayer<T>(C, C, 3);
    if (spec.has_upscaler)
      net.up_conv_ = Conv2dLayer<T>(C * spec.scale * spec.scale, C, 3);
    net.tail_ = Conv2dLayer<T>(spec.out_channels, C, 3);
    net.init_params(seed);
    return net;
  }

  const NetworkSpec& spec() const { return spec_; }
  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t s) { step_count_ = s; }

  /// Parameters in canonical traversal order: head, then per group per
  /// block (conv1, conv2, ca_down, ca_up) then the group tail, then body,
  /// upscale (if present) and tail; weight before bias at each layer.
  std::vector<ParamRefT<T>> params() {
    std::vector<ParamRefT<T>> out;
    auto push = [&out](const std::string& name, Conv2dLayer<T>& l) {
      out.push_back({name + ".weight", &l.weight});
      out.push_back({name + ".bias", &l.bias});
    };
    push("head", head_);
    for (size_t g = 0; g < groups_.size(); ++g) {
      const std::string gp = "g" + std::to_string(g);
      for (size_t b = 0; b < groups_[g].blocks.size(); ++b) {
        const std::string bp = gp + ".b" + std::to_string(b);
        push(bp + ".conv1", groups_[g].blocks[b].conv1);
        push(bp + ".conv2", groups_[g].blocks[b].conv2);
        push(bp + ".ca_down", groups_[g].blocks[b].ca.down);
        push(bp + ".ca_up", groups_[g].blocks[b].ca.up);
      }
      push(gp + ".tail", groups_[g].tail);
    }
    push("body", body_);
    if (up_conv_) push("upscale", *up_conv_);
    push("tail", tail_);
    return out;
  }

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    if (x.shape().c != spec_.in_channels)
      throw Error(std::string(role_name(spec_.role)) + ": input has " +
                  std::to_string(x.shape().c) + " channels, spec expects " +
                  std::to_string(spec_.in_channels));
    TensorT<T> h0 = head_.forward(x, record);
    TensorT<T> f = h0;
    for (auto& g : groups_) f = g.forward(f, record);
    TensorT<T> b = body_.forward(f, record);
    add_inplace(b, h0);  // long skip
    TensorT<T> u = std::move(b);
    if (up_conv_) u = pixel_shuffle(up_conv_->forward(u, record), spec_.scale);
    TensorT<T> y = tail_.forward(u, record);
    recorded_ = record;
    return y;
  }

  /// Accumulates dLoss/dParam into every parameter's grad field and
  /// returns the gradient with respect to the network input.
  TensorT<T> backward(const TensorT<T>& loss_grad) {
    if (!recorded_) throw Error("network: backward without a recorded forward");
    TensorT<T> g = tail_.backward(loss_grad);
    if (up_conv_) g = up_conv_->backward(pixel_unshuffle(g, spec_.scale));
    TensorT<T> skip = g;  // long skip branch to head output
    g = body_.backward(g);
    for (auto it = groups_.rbegin(); it != groups_.rend(); ++it) g = it->backward(g);
    add_inplace(g, skip);
    TensorT<T> gx = head_.backward(g);
    recorded_ = false;
    return gx;
  }

  void zero_grad() {
    for (auto& p : params()) p.param->reset_grad();
  }

  /// Standard Adam (beta1 0.9, beta2 0.999, eps 1e-8) with bias
  /// correction by step count. Gradients are reset to zero afterwards.
  void adam_step(double lr) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    auto ps = params();
    ensure_moments(ps);
    ++step_count_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
    for (size_t k = 0; k < ps.size(); ++k) {
      TensorT<T>& value = ps[k].param->value;
      TensorT<T>& grad = ps[k].param->grad;
      TensorT<T>& m = adam_m_[k];
      TensorT<T>& v = adam_v_[k];
      for (int64_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = kBeta1 * static_cast<double>(m[i]) + (1.0 - kBeta1) * g;
        const double vi = kBeta2 * static_cast<double>(v[i]) + (1.0 - kBeta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        value[i] = static_cast<T>(static_cast<double>(value[i]) -
                                  lr * mhat / (std::sqrt(vhat) + kEps));
      }
      grad.fill(T(0));
    }
  }

 private:
  void init_params(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& p : params()) {
      if (p.name.ends_with(".weight")) {
        const Shape s = p.param->value.shape();
        const double fan_in = static_cast<double>(s.c * s.h * s.w);
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (int64_t i = 0; i < p.param->value.size(); ++i)
          p.param->value[i] = static_cast<T>(normal(rng) * std_dev);
      }
      // biases stay zero
    }
  }

  void ensure_moments(const std::vector<ParamRefT<T>>& ps) {
    if (!adam_m_.empty()) return;
    adam_m_.reserve(ps.size());
    adam_v_.reserve(ps.size());
    for (const auto& p : ps) {
      adam_m_.emplace_back(p.param->value.shape());
      adam_v_.emplace_back(p.param->value.shape());
    }
  }

  NetworkSpec spec_{};
  Conv2dLayer<T> head_, body_, tail_;
  std::optional<Conv2dLayer<T>> up_conv_;
  std::vector<ResidualGroup<T>> groups_;
  std::vector<TensorT<T>> adam_m_, adam_v_;
  int64_t step_count_ = 0;
  bool recorded_ = false;
};

using Network = NetworkT<float>;

template <typename T>
NetworkT<T> build_network(const NetworkSpec& spec, uint64_t seed) {
  return NetworkT<T>::build(spec, seed);
}

template <typename T>
struct LossValueT {
  double value = 0.0;
  TensorT<T> grad;  // with respect to the prediction
};

using LossValue = LossValueT<float>;

/// Mean absolute error; grad is sign(pred - target)/count with sign(0)=0.
template <typename T>
LossValueT<T> l1_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!(pred.shape() == target.shape()))
    throw Error("l1_loss: shape mismatch " + pred.shape().str() + " vs " +
                target.shape().str());
  LossValueT<T> loss;
  loss.grad = TensorT<T>(pred.shape());
  const double inv = 1.0 / static_cast<double>(pred.size());
  double acc = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += std::abs(d);
    loss.grad[i] = d > 0 ? static_cast<T>(inv) : (d < 0 ? static_cast<T>(-inv) : T(0));
  }
  loss.value = acc * inv;
  return loss;
}

}  // namespace wtsr
