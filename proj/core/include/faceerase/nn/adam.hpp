#pragma once

#include <cstdint>
#include <vector>

#include "faceerase/nn/layers.hpp"

namespace faceerase::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter in the order of
/// the ParamList it was built from; that order is part of the checkpoint.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(ParamList<T> params, AdamOptions options);

  void step();
  void zero_grad() { params_.zero_grad(); }

  [[nodiscard]] std::int64_t steps() const { return t_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }
  [[nodiscard]] ParamList<T>& params() { return params_; }

  /// Moments exposed for checkpointing: m then v per parameter.
  [[nodiscard]] std::vector<std::vector<T>>& first_moments() { return m_; }
  [[nodiscard]] std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParamList<T> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace faceerase::nn
