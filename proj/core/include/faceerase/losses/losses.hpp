#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "faceerase/nn/layers.hpp"

namespace faceerase::losses {

using nn::Var;

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EdgeWeights {
  double adv = 1.0;
  double fm = 10.0;
};

struct InpaintWeights {
  double adv = 0.1;
  double perc = 1.0;
  double l1 = 1.0;
  double style = 500.0;
  double pc = 1.0;
};

struct LossWeights {
  EdgeWeights edge;
  InpaintWeights inpaint;
};

inline constexpr double kLogEps = 1e-7;

enum class Side { kGenerator, kDiscriminator };

/// Patch scores are post-sigmoid. Discriminator: -mean log D(real) - mean
/// log(1 - D(fake)); generator: -mean log D(fake). `real` is ignored on the
/// generator side.
template <typename T>
Var<T> adversarial_loss(const Var<T>& real, const Var<T>& fake, Side side);

/// Sum over layers of mean |fake_i - real_i|; real activations are detached.
template <typename T>
Var<T> feature_matching_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real);

template <typename T>
Var<T> l1_loss(const Var<T>& fake, const Var<T>& real);

/// Mean |warped - real| over all pixels, or over hole pixels only when
/// `hole` is given (mask broadcast over channels).
template <typename T>
Var<T> pixel_clone_loss(const Var<T>& warped, const Var<T>& real, const Var<T>* hole = nullptr);

/// (N, C, H, W) -> (N, 1, C, C), normalized by C H W.
template <typename T>
Var<T> gram_matrix(const Var<T>& features);

struct VggOptions {
  /// Channel widths of the standard 19-layer network are divided by this.
  int width_divisor = 1;
  std::uint64_t seed = 19;
  /// Optional blob with pretrained weights (names vgg.conv{i}.weight/.bias).
  std::optional<std::filesystem::path> weights;
};

/// Frozen VGG-19 trunk up to relu5_1. Inputs are (N, 3, H, W) in [0,1] and
/// are normalized with ImageNet statistics before the first layer.
template <typename T>
class VggExtractor {
 public:
  static constexpr int kLayers = 5;
  explicit VggExtractor(const VggOptions& options = {});

  /// Activations at relu1_1, relu2_1, relu3_1, relu4_1, relu5_1.
  [[nodiscard]] std::vector<Var<T>> features(const Var<T>& image) const;
  nn::ParamList<T> parameters();
  [[nodiscard]] const VggOptions& options() const { return options_; }

  /// Names of the returned layers.
  static const std::vector<std::string>& layer_names();

 private:
  VggOptions options_;
  std::vector<nn::Conv2d<T>> convs_;
};

/// Sum over layers of mean |phi_i(fake) - phi_i(real)|.
template <typename T>
Var<T> perceptual_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real);
/// Sum over layers of mean |G_i(fake) - G_i(real)| over Gram entries.
template <typename T>
Var<T> style_loss(const std::vector<Var<T>>& fake, const std::vector<Var<T>>& real);

template <typename T>
Var<T> perceptual_loss(const Var<T>& fake, const Var<T>& real, const VggExtractor<T>& vgg);
template <typename T>
Var<T> style_loss(const Var<T>& fake, const Var<T>& real, const VggExtractor<T>& vgg);

template <typename S>
struct InpaintComponents {
  S adv;
  S perc;
  S l1;
  S style;
  S pc;
};

/// Weighted sum; any non-finite component raises DivergenceError.
double total_inpaint_loss(const InpaintComponents<double>& c, const InpaintWeights& w);
template <typename T>
Var<T> total_inpaint_loss(const InpaintComponents<Var<T>>& c, const InpaintWeights& w);

/// Throws DivergenceError naming the first non-finite entry.
void check_finite(const std::vector<std::pair<std::string, double>>& values, const std::string& context);

}  // namespace faceerase::losses
