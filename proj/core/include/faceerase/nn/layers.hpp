#pragma once

#include <random>
#include <string>
#include <vector>

#include "faceerase/nn/ops.hpp"

namespace faceerase::nn {

/// Non-owning view of one trainable tensor, used by optimizers and checkpoints.
template <typename T>
struct ParamRef {
  std::string name;
  Var<T>* var;
};

/// Non-trainable persistent state (spectral-norm power-iteration vectors).
template <typename T>
struct BufferRef {
  std::string name;
  std::vector<T>* data;
};

template <typename T>
struct ParamList {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;

  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& p : params) total += p.var->value().size();
    return total;
  }
  void zero_grad() {
    for (auto& p : params) p.var->zero_grad();
  }
  void set_requires_grad(bool on) {
    for (auto& p : params) p.var->set_requires_grad(on);
  }
};

using Rng = std::mt19937_64;

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, ops::ConvParams params, bool bias = true);

  /// Weights ~ N(0, stddev), bias = 0.
  void init_normal(Rng& rng, T stddev);
  void zero();

  /// Divides the weight by its largest singular value on every forward.
  void enable_spectral_norm(Rng& rng);
  [[nodiscard]] bool spectral_norm() const { return !sn_u_.empty(); }
  /// Refines the singular-vector estimate by `iterations` power steps.
  void power_iterate(int iterations);
  /// Power iterations until no entry of u moves by more than `tol`; returns the
  /// iteration count.
  int converge_power_iteration(int max_iterations = 2000, T tol = T(1e-6));
  /// Weight actually applied in forward (normalized when spectral norm is on).
  [[nodiscard]] Var<T> effective_weight() const;

  [[nodiscard]] Var<T> forward(const Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out);

  [[nodiscard]] int in_channels() const { return in_; }
  [[nodiscard]] int out_channels() const { return out_; }
  [[nodiscard]] int kernel() const { return kernel_; }
  [[nodiscard]] const ops::ConvParams& params() const { return params_; }

  Var<T> weight;
  Var<T> bias;

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
  ops::ConvParams params_{};
  std::vector<T> sn_u_;
  std::vector<T> sn_v_;
};

/// Squeeze-and-excitation style channel gating: x * sigmoid(W2 relu(W1 avgpool(x))).
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(int channels, int reduction);
  void init_normal(Rng& rng, T stddev);
  /// `force_open` replaces the gate with 1 (used to compare against no-attention).
  [[nodiscard]] Var<T> forward(const Var<T>& x, bool force_open = false) const;
  void collect(const std::string& prefix, ParamList<T>& out);

 private:
  Conv2d<T> squeeze_;
  Conv2d<T> excite_;
};

}  // namespace faceerase::nn
