#include "faceerase/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace faceerase::nn {

namespace {

template <typename T>
void normalize(std::vector<T>& v) {
  double n = 0;
  for (T x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  const T inv = static_cast<T>(1.0 / std::max(n, 1e-12));
  for (T& x : v) x *= inv;
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, ops::ConvParams params, bool bias)
    : weight(Tensor<T>(Shape{out_channels, in_channels, kernel, kernel}), true),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      params_(params) {
  if (bias) this->bias = Var<T>(Tensor<T>(Shape{1, out_channels, 1, 1}), true);
}

template <typename T>
void Conv2d<T>::init_normal(Rng& rng, T stddev) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (T& w : weight.mutable_value().storage()) w = static_cast<T>(dist(rng));
  if (bias.defined()) bias.mutable_value().fill(T{0});
}

template <typename T>
void Conv2d<T>::zero() {
  weight.mutable_value().fill(T{0});
  if (bias.defined()) bias.mutable_value().fill(T{0});
}

template <typename T>
void Conv2d<T>::enable_spectral_norm(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  sn_u_.resize(static_cast<std::size_t>(out_));
  sn_v_.resize(static_cast<std::size_t>(in_) * kernel_ * kernel_);
  for (T& x : sn_u_) x = static_cast<T>(dist(rng));
  for (T& x : sn_v_) x = static_cast<T>(dist(rng));
  normalize(sn_u_);
  normalize(sn_v_);
}

template <typename T>
void Conv2d<T>::power_iterate(int iterations) {
  if (sn_u_.empty()) return;
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const auto rows = static_cast<Eigen::Index>(sn_u_.size());
  const auto cols = static_cast<Eigen::Index>(sn_v_.size());
  Eigen::Map<const Mat> w(weight.value().data(), rows, cols);
  Eigen::Map<Vec> u(sn_u_.data(), rows);
  Eigen::Map<Vec> v(sn_v_.data(), cols);
  for (int i = 0; i < iterations; ++i) {
    Vec nv = w.transpose() * u;
    const T nvn = nv.norm();
    if (nvn > T{0}) v = nv / nvn;
    Vec nu = w * v;
    const T nun = nu.norm();
    if (nun > T{0}) u = nu / nun;
  }
}

template <typename T>
int Conv2d<T>::converge_power_iteration(int max_iterations, T tol) {
  if (sn_u_.empty()) return 0;
  std::vector<T> previous = sn_u_;
  for (int i = 1; i <= max_iterations; ++i) {
    power_iterate(1);
    T change{0};
    for (std::size_t k = 0; k < sn_u_.size(); ++k) change = std::max(change, std::abs(sn_u_[k] - previous[k]));
    if (change <= tol) return i;
    previous = sn_u_;
  }
  return max_iterations;
}

template <typename T>
Var<T> Conv2d<T>::effective_weight() const {
  if (sn_u_.empty()) return weight;
  return ops::spectral_divide(weight, sn_u_, sn_v_);
}

template <typename T>
Var<T> Conv2d<T>::forward(const Var<T>& x) const {
  return ops::conv2d(x, effective_weight(), bias, params_);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.params.push_back({prefix + ".weight", &weight});
  if (bias.defined()) out.params.push_back({prefix + ".bias", &bias});
  if (!sn_u_.empty()) {
    out.buffers.push_back({prefix + ".sn_u", &sn_u_});
    out.buffers.push_back({prefix + ".sn_v", &sn_v_});
  }
}

template <typename T>
ChannelAttention<T>::ChannelAttention(int channels, int reduction)
    : squeeze_(channels, std::max(1, channels / reduction), 1, {}),
      excite_(std::max(1, channels / reduction), channels, 1, {}) {}

template <typename T>
void ChannelAttention<T>::init_normal(Rng& rng, T stddev) {
  squeeze_.init_normal(rng, stddev);
  excite_.init_normal(rng, stddev);
}

template <typename T>
Var<T> ChannelAttention<T>::forward(const Var<T>& x, bool force_open) const {
  if (force_open) return x;
  auto pooled = ops::global_avg_pool(x);
  auto gate = ops::sigmoid(excite_.forward(ops::relu(squeeze_.forward(pooled))));
  return ops::mul(x, gate);
}

template <typename T>
void ChannelAttention<T>::collect(const std::string& prefix, ParamList<T>& out) {
  squeeze_.collect(prefix + ".squeeze", out);
  excite_.collect(prefix + ".excite", out);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ChannelAttention<float>;
template class ChannelAttention<double>;

}  // namespace faceerase::nn
