#pragma once

#include <array>
#include <vector>

#include "faceerase/nn/var.hpp"

// Differentiable tensor operations. All functions are instantiated for float
// (training and inference) and double (gradient verification).
namespace faceerase::nn::ops {

struct ConvParams {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// Output spatial extent of a convolution along one axis.
constexpr int conv_out_extent(int in, int kernel, const ConvParams& p) {
  return (in + 2 * p.pad - p.dilation * (kernel - 1) - 1) / p.stride + 1;
}

/// `weight` is (Cout, Cin, k, k); `bias` is (1, Cout, 1, 1) or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvParams p);

/// Per-sample, per-channel normalization without affine parameters.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> tanh(const Var<T>& x);
template <typename T>
Var<T> abs(const Var<T>& x);
/// log(clamp(x, eps, 1)). Clamped elements receive no gradient.
template <typename T>
Var<T> log_clamped(const Var<T>& x, T eps);

// Elementwise binary ops broadcast any unit dimension of either operand.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& x, T factor);
template <typename T>
Var<T> add_scalar(const Var<T>& x, T value);

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);
/// Channels [begin, end) of x.
template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int end);

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int factor);
template <typename T>
Var<T> max_pool2(const Var<T>& x);
/// (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
/// mean(|a - b|) over all elements; shapes must match.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);

/// (N, C, H, W) -> (N, 1, C, C) with G = A Aᵀ / (C H W), A the C x HW unfolding.
template <typename T>
Var<T> gram(const Var<T>& x);

/// Bilinear resampling of `image` (N, C, H, W) at p + flow(p) * (W/2, H/2),
/// flow is (N, 2, H, W) with channel 0 = x. Sampling positions are clamped
/// to the image, so out-of-range samples repeat the border.
template <typename T>
Var<T> warp(const Var<T>& image, const Var<T>& flow);

/// weight / sigma where sigma = uᵀ W v for the (Cout, Cin*k*k) unfolding.
/// u and v are treated as constants (standard spectral normalization).
template <typename T>
Var<T> spectral_divide(const Var<T>& weight, const std::vector<T>& u, const std::vector<T>& v,
                       T* sigma_out = nullptr);

}  // namespace faceerase::nn::ops
