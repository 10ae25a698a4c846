#pragma once

#include <vector>

#include "faceerase/models/specs.hpp"
#include "faceerase/nn/layers.hpp"

namespace faceerase::models {

using nn::Var;

/// Raised when input extents or channel counts violate a network contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
class ResnetGenerator {
 public:
  ResnetGenerator() = default;
  ResnetGenerator(const GeneratorSpec& spec, nn::Rng& rng, T init_std = T(0.02));

  /// x is (N, in_channels, H, W) with H and W multiples of 4.
  [[nodiscard]] Var<T> forward(const Var<T>& x) const;
  nn::ParamList<T> parameters();
  [[nodiscard]] const GeneratorSpec& spec() const { return spec_; }

 private:
  struct ResBlock {
    nn::Conv2d<T> dilated;
    nn::Conv2d<T> plain;
  };
  GeneratorSpec spec_;
  nn::Conv2d<T> stem_, down1_, down2_, up1_, up2_, head_;
  std::vector<ResBlock> blocks_;
};

/// G^edge: (gray, edges, mask) each (N,1,H,W) -> completed edges in (0,1).
template <typename T>
Var<T> edge_generator_forward(const ResnetGenerator<T>& net, const Var<T>& gray,
                              const Var<T>& edges_masked, const Var<T>& mask);

/// G^pc: (completed edges (N,1), image (N,3), mask (N,1)) -> flow (N,2) in (-1,1).
template <typename T>
Var<T> pixel_clone_forward(const ResnetGenerator<T>& net, const Var<T>& edge_completed,
                           const Var<T>& image, const Var<T>& mask);

template <typename T>
class RefineNet {
 public:
  RefineNet() = default;
  RefineNet(const RefineSpec& spec, nn::Rng& rng, T init_std = T(0.02));

  /// x is (N, in_channels, H, W) with H and W multiples of 32.
  [[nodiscard]] Var<T> forward(const Var<T>& x, bool force_gates_open = false) const;
  nn::ParamList<T> parameters();
  [[nodiscard]] const RefineSpec& spec() const { return spec_; }

 private:
  struct Block {
    nn::Conv2d<T> conv1;
    nn::Conv2d<T> conv2;
    nn::Conv2d<T> shortcut;
    nn::ChannelAttention<T> attention;
  };
  [[nodiscard]] Var<T> run_block(const Block& b, const Var<T>& x, bool gates_open) const;

  RefineSpec spec_;
  nn::Conv2d<T> stem_, head_;
  std::vector<Block> down_;
  std::vector<Block> up_;
};

/// G^ref: (warp(I, F), I, F) -> refined image in (0,1).
template <typename T>
Var<T> refine_forward(const RefineNet<T>& net, const Var<T>& coarse, const Var<T>& image,
                      const Var<T>& flow, bool force_gates_open = false);

template <typename T>
struct DiscriminatorOutput {
  Var<T> scores;                // (N, 1, h, w) patch realness in (0,1)
  std::vector<Var<T>> features;  // post-activation output of every layer
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const DiscriminatorSpec& spec, nn::Rng& rng, T init_std = T(0.02));

  [[nodiscard]] DiscriminatorOutput<T> forward(const Var<T>& x) const;
  /// One power-iteration refinement per normalized layer.
  void power_iterate(int iterations = 1);
  void converge_spectral_norm();
  nn::ParamList<T> parameters();
  [[nodiscard]] const DiscriminatorSpec& spec() const { return spec_; }
  [[nodiscard]] const std::vector<nn::Conv2d<T>>& layers() const { return layers_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<nn::Conv2d<T>> layers_;
};

/// Concatenates the two inputs along channels and scores them.
template <typename T>
DiscriminatorOutput<T> discriminator_forward(const PatchDiscriminator<T>& net, const Var<T>& a,
                                             const Var<T>& b);

}  // namespace faceerase::models
