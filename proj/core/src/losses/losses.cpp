#include "faceerase/losses/losses.hpp"

#include <cmath>

#include "faceerase/nn/serialize.hpp"

namespace faceerase::losses {

namespace ops = nn::ops;
using nn::Shape;
using nn::Tensor;

template <typename T>
Var<T> adversarial_loss(const Var<T>& real, const Var<T>& fake, Side side) {
  const T eps = static_cast<T>(kLogEps);
  if (side == Side::kGenerator) return ops::scale(ops::mean(ops::log_clamped(fake, eps)), T{-1});
  const Var<T> real_term = ops::mean(ops::log_clamped(real, eps));
  const Var<T> one_minus = ops::add_scalar(ops::scale(fake, T{-1}), T{1});
  const Var<T> fake_term = ops::mean(ops::log_clamped(one_minus, eps));
  return ops::scale(ops::add(real_term, fake_term), T{-1});
}

template <typename T>
Var<T> feature_matching_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real) {
  if (fake.size() != real.size() || fake.empty()) {
    throw nn::ShapeError("feature_matching_loss: layer count mismatch");
  }
  Var<T> total;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const Var<T> term = ops::mean_abs_diff(fake[i], real[i].detach());
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> l1_loss(const Var<T>& fake, const Var<T>& real) {
  return ops::mean_abs_diff(fake, real);
}

template <typename T>
Var<T> pixel_clone_loss(const Var<T>& warped, const Var<T>& real, const Var<T>* hole) {
  if (hole == nullptr) return ops::mean_abs_diff(warped, real);
  if (warped.shape() != real.shape()) throw nn::ShapeError("pixel_clone_loss: shape mismatch");
  const Shape hs = hole->shape();
  if (hs.n != warped.shape().n || hs.c != 1 || hs.h != warped.shape().h || hs.w != warped.shape().w) {
    throw nn::ShapeError("pixel_clone_loss: hole mask must be (N,1,H,W)");
  }
  double count = 0;
  for (T v : hole->value().span()) count += static_cast<double>(v);
  if (count == 0) return Var<T>(Tensor<T>(Shape{}, T{0}));
  const Var<T> diff = ops::abs(ops::sub(warped, real));
  const Var<T> masked = ops::mul(diff, hole->detach());
  return ops::scale(ops::sum(masked), static_cast<T>(1.0 / (count * warped.shape().c)));
}

template <typename T>
Var<T> gram_matrix(const Var<T>& features) {
  return ops::gram(features);
}

namespace {

// 0 marks a 2x2 max pool.
constexpr int kVggPlan[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512};
constexpr int kTapAfterConv[] = {0, 2, 4, 8, 12};

}  // namespace

template <typename T>
VggExtractor<T>::VggExtractor(const VggOptions& options) : options_(options) {
  if (options.width_divisor < 1) throw std::invalid_argument("vgg width divisor must be >= 1");
  nn::Rng rng(options.seed);
  int in = 3;
  for (int width : kVggPlan) {
    if (width == 0) continue;
    const int out = std::max(1, width / options.width_divisor);
    nn::Conv2d<T> conv(in, out, 3, ops::ConvParams{1, 1, 1});
    conv.init_normal(rng, static_cast<T>(std::sqrt(2.0 / (in * 9))));
    convs_.push_back(std::move(conv));
    in = out;
  }
  if (options.weights) {
    const nn::NamedTensors blob = nn::read_blob(*options.weights);
    for (auto& p : parameters().params) {
      const auto it = blob.find(p.name);
      if (it == blob.end()) throw nn::FormatError("vgg weights lack " + p.name);
      if (it->second.shape() != p.var->shape()) throw nn::FormatError("vgg weight shape mismatch for " + p.name);
      p.var->mutable_value() = it->second.template cast<T>();
    }
  }
  parameters().set_requires_grad(false);
}

template <typename T>
nn::ParamList<T> VggExtractor<T>::parameters() {
  nn::ParamList<T> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect("vgg.conv" + std::to_string(i), out);
  return out;
}

template <typename T>
const std::vector<std::string>& VggExtractor<T>::layer_names() {
  static const std::vector<std::string> names{"relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"};
  return names;
}

template <typename T>
std::vector<Var<T>> VggExtractor<T>::features(const Var<T>& image) const {
  if (image.shape().c != 3) throw nn::ShapeError("vgg: input must have 3 channels");
  Tensor<T> mean(Shape{1, 3, 1, 1});
  Tensor<T> inv_std(Shape{1, 3, 1, 1});
  const double m[3] = {0.485, 0.456, 0.406};
  const double s[3] = {0.229, 0.224, 0.225};
  for (int c = 0; c < 3; ++c) {
    mean[static_cast<std::size_t>(c)] = static_cast<T>(-m[c]);
    inv_std[static_cast<std::size_t>(c)] = static_cast<T>(1.0 / s[c]);
  }
  Var<T> x = ops::mul(ops::add(image, Var<T>(mean)), Var<T>(inv_std));
  std::vector<Var<T>> taps;
  std::size_t conv = 0;
  std::size_t tap = 0;
  for (int width : kVggPlan) {
    if (width == 0) {
      // Tiny inputs keep their last spatial extent instead of vanishing.
      if (x.shape().h >= 2 && x.shape().w >= 2) x = ops::max_pool2(x);
      continue;
    }
    x = ops::relu(convs_[conv].forward(x));
    if (tap < std::size(kTapAfterConv) && static_cast<int>(conv) == kTapAfterConv[tap]) {
      taps.push_back(x);
      ++tap;
    }
    ++conv;
  }
  return taps;
}

template <typename T>
Var<T> perceptual_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real) {
  if (fake.size() != real.size() || fake.empty()) throw nn::ShapeError("perceptual_loss: layer mismatch");
  Var<T> total;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const Var<T> term = ops::mean_abs_diff(fake[i], real[i]);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> style_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real) {
  if (fake.size() != real.size() || fake.empty()) throw nn::ShapeError("style_loss: layer mismatch");
  Var<T> total;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const Var<T> term = ops::mean_abs_diff(ops::gram(fake[i]), ops::gram(real[i]));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> perceptual_loss(const Var<T>& fake, const Var<T>& real, const VggExtractor<T>& vgg) {
  return perceptual_loss(vgg.features(fake), vgg.features(real));
}

template <typename T>
Var<T> style_loss(const Var<T>& fake, const Var<T>& real, const VggExtractor<T>& vgg) {
  return style_loss(vgg.features(fake), vgg.features(real));
}

double total_inpaint_loss(const InpaintComponents<double>& c, const InpaintWeights& w) {
  check_finite({{"adv", c.adv}, {"perc", c.perc}, {"l1", c.l1}, {"style", c.style}, {"pc", c.pc}},
               "total_inpaint_loss");
  return w.adv * c.adv + w.perc * c.perc + w.l1 * c.l1 + w.style * c.style + w.pc * c.pc;
}

template <typename T>
Var<T> total_inpaint_loss(const InpaintComponents<Var<T>>& c, const InpaintWeights& w) {
  auto scalar = [](const Var<T>& v) { return static_cast<double>(v.value()[0]); };
  check_finite({{"adv", scalar(c.adv)},
                {"perc", scalar(c.perc)},
                {"l1", scalar(c.l1)},
                {"style", scalar(c.style)},
                {"pc", scalar(c.pc)}},
               "total_inpaint_loss");
  Var<T> total = ops::scale(c.adv, static_cast<T>(w.adv));
  total = ops::add(total, ops::scale(c.perc, static_cast<T>(w.perc)));
  total = ops::add(total, ops::scale(c.l1, static_cast<T>(w.l1)));
  total = ops::add(total, ops::scale(c.style, static_cast<T>(w.style)));
  return ops::add(total, ops::scale(c.pc, static_cast<T>(w.pc)));
}

void check_finite(const std::vector<std::pair<std::string, double>>& values, const std::string& context) {
  for (const auto& [name, v] : values) {
    if (!std::isfinite(v)) {
      throw DivergenceError(context + ": loss component '" + name + "' is " + std::to_string(v));
    }
  }
}

#define FACEERASE_INSTANTIATE_LOSSES(T)                                                             \
  template Var<T> adversarial_loss<T>(const Var<T>&, const Var<T>&, Side);                         \
  template Var<T> feature_matching_loss<T>(const std::vector<Var<T>>&, const std::vector<Var<T>>&); \
  template Var<T> l1_loss<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> pixel_clone_loss<T>(const Var<T>&, const Var<T>&, const Var<T>*);                \
  template Var<T> gram_matrix<T>(const Var<T>&);                                                   \
  template class VggExtractor<T>;                                                                  \
  template Var<T> perceptual_loss<T>(const std::vector<Var<T>>&, const std::vector<Var<T>>&);      \
  template Var<T> style_loss<T>(const std::vector<Var<T>>&, const std::vector<Var<T>>&);           \
  template Var<T> perceptual_loss<T>(const Var<T>&, const Var<T>&, const VggExtractor<T>&);        \
  template Var<T> style_loss<T>(const Var<T>&, const Var<T>&, const VggExtractor<T>&);             \
  template Var<T> total_inpaint_loss<T>(const InpaintComponents<Var<T>>&, const InpaintWeights&);

FACEERASE_INSTANTIATE_LOSSES(float)
FACEERASE_INSTANTIATE_LOSSES(double)

#undef FACEERASE_INSTANTIATE_LOSSES

}  // namespace faceerase::losses
