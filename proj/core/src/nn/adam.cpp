#include "faceerase/nn/adam.hpp"

#include <cmath>

namespace faceerase::nn {

template <typename T>
Adam<T>::Adam(ParamList<T> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_.params) {
    m_.emplace_back(p.var->value().size(), T{0});
    v_.emplace_back(p.var->value().size(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T step_size = static_cast<T>(options_.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(options_.eps);
  const T tb1 = static_cast<T>(b1);
  const T tb2 = static_cast<T>(b2);
  for (std::size_t k = 0; k < params_.params.size(); ++k) {
    Var<T>& var = *params_.params[k].var;
    if (!var.has_grad()) continue;
    const Tensor<T>& g = var.grad();
    Tensor<T>& w = var.mutable_value();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = tb1 * m[i] + (T{1} - tb1) * g[i];
      v[i] = tb2 * v[i] + (T{1} - tb2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace faceerase::nn
