#pragma once

#include <string>
#include <vector>

namespace faceerase::models {

enum class Head { kSigmoid, kTanh };

/// Encoder / dilated-residual / decoder generator shared by the edge
/// completion and pixel-clone networks.
///
///   stem   7x7 conv           in   -> w      instance norm, ReLU
///   down1  4x4 conv /2        w    -> 2w     instance norm, ReLU
///   down2  4x4 conv /2        2w   -> 4w     instance norm, ReLU
///   res*B  3x3 conv dil d,    4w   -> 4w     IN, ReLU; 3x3 conv, IN; + input
///   up1    nearest x2, 3x3    4w   -> 2w     instance norm, ReLU
///   up2    nearest x2, 3x3    2w   -> w      instance norm, ReLU
///   head   7x7 conv           w    -> out    sigmoid or tanh
///
/// Every convolution carries a bias.
struct GeneratorSpec {
  int in_channels = 3;
  int out_channels = 1;
  int base_width = 64;
  int residual_blocks = 8;
  int dilation = 2;
  Head head = Head::kSigmoid;
  /// Start the head at zero so the pixel-clone flow begins as the identity warp.
  bool zero_init_head = false;

  /// (gray, masked edges, mask) -> edge probability.
  static GeneratorSpec edge(int base_width = 64);
  /// (completed edges, masked image, mask) -> 2-channel flow.
  static GeneratorSpec pixel_clone(int base_width = 64);

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

/// U-Net refine network: stem at full resolution, five stride-2 residual
/// blocks, five upsampling residual blocks, skip connections joined by
/// addition, and channel attention inside every residual block.
struct RefineSpec {
  int in_channels = 8;  // warp(I, F), I, F
  int out_channels = 3;
  std::vector<int> widths{64, 128, 256, 512, 512};
  bool channel_attention = true;
  int attention_reduction = 16;
  /// false gives the plain auto-encoder variant.
  bool skip_connections = true;

  friend bool operator==(const RefineSpec&, const RefineSpec&) = default;
};

/// One convolution of the PatchGAN table.
struct DiscriminatorLayer {
  int out_channels;
  int kernel;
  int stride;
  int pad;
};

/// PatchGAN: 4x4 convolutions with strides 2,2,2,1,1, spectral norm on every
/// weight, leaky ReLU between layers and a sigmoid on the patch scores.
struct DiscriminatorSpec {
  int in_channels = 2;
  int base_width = 64;
  bool spectral_norm = true;
  double leaky_slope = 0.2;

  [[nodiscard]] std::vector<DiscriminatorLayer> layers() const;
  /// Input pixels seen by one output score, from the layer table.
  [[nodiscard]] int receptive_field() const;

  /// Scores (edge map, gray image).
  static DiscriminatorSpec edge(int base_width = 64);
  /// Scores (image, completed edge map).
  static DiscriminatorSpec inpaint(int base_width = 64);

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

}  // namespace faceerase::models
