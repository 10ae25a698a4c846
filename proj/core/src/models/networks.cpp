#include "faceerase/models/networks.hpp"

#include <algorithm>

namespace faceerase::models {

namespace ops = nn::ops;

GeneratorSpec GeneratorSpec::edge(int base_width) {
  GeneratorSpec s;
  s.in_channels = 3;
  s.out_channels = 1;
  s.base_width = base_width;
  s.head = Head::kSigmoid;
  return s;
}

GeneratorSpec GeneratorSpec::pixel_clone(int base_width) {
  GeneratorSpec s;
  s.in_channels = 5;
  s.out_channels = 2;
  s.base_width = base_width;
  s.head = Head::kTanh;
  s.zero_init_head = true;
  return s;
}

std::vector<DiscriminatorLayer> DiscriminatorSpec::layers() const {
  const int w = base_width;
  return {{w, 4, 2, 1}, {2 * w, 4, 2, 1}, {4 * w, 4, 2, 1}, {8 * w, 4, 1, 1}, {1, 4, 1, 1}};
}

int DiscriminatorSpec::receptive_field() const {
  int field = 1;
  const auto table = layers();
  for (auto it = table.rbegin(); it != table.rend(); ++it) field = (field - 1) * it->stride + it->kernel;
  return field;
}

DiscriminatorSpec DiscriminatorSpec::edge(int base_width) {
  DiscriminatorSpec s;
  s.in_channels = 2;
  s.base_width = base_width;
  return s;
}

DiscriminatorSpec DiscriminatorSpec::inpaint(int base_width) {
  DiscriminatorSpec s;
  s.in_channels = 4;
  s.base_width = base_width;
  return s;
}

// ---------------------------------------------------------------------------

template <typename T>
ResnetGenerator<T>::ResnetGenerator(const GeneratorSpec& spec, nn::Rng& rng, T init_std)
    : spec_(spec) {
  const int w = spec.base_width;
  stem_ = nn::Conv2d<T>(spec.in_channels, w, 7, {1, 3, 1});
  down1_ = nn::Conv2d<T>(w, 2 * w, 4, {2, 1, 1});
  down2_ = nn::Conv2d<T>(2 * w, 4 * w, 4, {2, 1, 1});
  for (int i = 0; i < spec.residual_blocks; ++i) {
    blocks_.push_back({nn::Conv2d<T>(4 * w, 4 * w, 3, {1, spec.dilation, spec.dilation}),
                       nn::Conv2d<T>(4 * w, 4 * w, 3, {1, 1, 1})});
  }
  up1_ = nn::Conv2d<T>(4 * w, 2 * w, 3, {1, 1, 1});
  up2_ = nn::Conv2d<T>(2 * w, w, 3, {1, 1, 1});
  head_ = nn::Conv2d<T>(w, spec.out_channels, 7, {1, 3, 1});

  for (auto* c : {&stem_, &down1_, &down2_}) c->init_normal(rng, init_std);
  for (auto& b : blocks_) {
    b.dilated.init_normal(rng, init_std);
    b.plain.init_normal(rng, init_std);
  }
  for (auto* c : {&up1_, &up2_, &head_}) c->init_normal(rng, init_std);
  if (spec.zero_init_head) head_.zero();
}

template <typename T>
Var<T> ResnetGenerator<T>::forward(const Var<T>& x) const {
  const auto s = x.shape();
  if (s.c != spec_.in_channels) {
    throw DimensionError("generator expects " + std::to_string(spec_.in_channels) +
                         " input channels, got " + std::to_string(s.c));
  }
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw DimensionError("generator input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not a multiple of 4");
  }
  auto block = [](const nn::Conv2d<T>& conv, const Var<T>& in) {
    return ops::relu(ops::instance_norm(conv.forward(in)));
  };
  Var<T> h = block(stem_, x);
  h = block(down1_, h);
  h = block(down2_, h);
  for (const auto& b : blocks_) {
    Var<T> r = ops::relu(ops::instance_norm(b.dilated.forward(h)));
    r = ops::instance_norm(b.plain.forward(r));
    h = ops::add(h, r);
  }
  h = block(up1_, ops::upsample_nearest(h, 2));
  h = block(up2_, ops::upsample_nearest(h, 2));
  h = head_.forward(h);
  return spec_.head == Head::kSigmoid ? ops::sigmoid(h) : ops::tanh(h);
}

template <typename T>
nn::ParamList<T> ResnetGenerator<T>::parameters() {
  nn::ParamList<T> out;
  stem_.collect("stem", out);
  down1_.collect("down1", out);
  down2_.collect("down2", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].dilated.collect("res" + std::to_string(i) + ".dilated", out);
    blocks_[i].plain.collect("res" + std::to_string(i) + ".plain", out);
  }
  up1_.collect("up1", out);
  up2_.collect("up2", out);
  head_.collect("head", out);
  return out;
}

namespace {
template <typename T>
void check_same_extent(const Var<T>& a, const Var<T>& b, const char* what) {
  const auto sa = a.shape();
  const auto sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError(std::string(what) + ": inputs " + sa.str() + " and " + sb.str() +
                         " differ in extent");
  }
}
}  // namespace

template <typename T>
Var<T> edge_generator_forward(const ResnetGenerator<T>& net, const Var<T>& gray,
                              const Var<T>& edges_masked, const Var<T>& mask) {
  check_same_extent(gray, edges_masked, "edge generator");
  check_same_extent(gray, mask, "edge generator");
  return net.forward(ops::concat_channels<T>({gray, edges_masked, mask}));
}

template <typename T>
Var<T> pixel_clone_forward(const ResnetGenerator<T>& net, const Var<T>& edge_completed,
                           const Var<T>& image, const Var<T>& mask) {
  check_same_extent(image, edge_completed, "pixel-clone generator");
  check_same_extent(image, mask, "pixel-clone generator");
  return net.forward(ops::concat_channels<T>({edge_completed, image, mask}));
}

// ---------------------------------------------------------------------------

template <typename T>
RefineNet<T>::RefineNet(const RefineSpec& spec, nn::Rng& rng, T init_std) : spec_(spec) {
  if (spec.widths.size() != 5) throw DimensionError("refine net needs exactly 5 stage widths");
  const auto& wd = spec.widths;
  auto make_block = [&](int cin, int cout, int stride) {
    Block b{nn::Conv2d<T>(cin, cout, 3, {stride, 1, 1}), nn::Conv2d<T>(cout, cout, 3, {1, 1, 1}),
            nn::Conv2d<T>(cin, cout, 1, {stride, 0, 1}),
            nn::ChannelAttention<T>(cout, spec.attention_reduction)};
    b.conv1.init_normal(rng, init_std);
    b.conv2.init_normal(rng, init_std);
    b.shortcut.init_normal(rng, init_std);
    b.attention.init_normal(rng, init_std);
    return b;
  };
  stem_ = nn::Conv2d<T>(spec.in_channels, wd[0], 3, {1, 1, 1});
  stem_.init_normal(rng, init_std);
  for (int k = 0; k < 5; ++k) down_.push_back(make_block(k == 0 ? wd[0] : wd[k - 1], wd[k], 2));
  // Up block k lands on encoder level 4-k, whose width is wd[3-k] (the stem for k = 4).
  for (int k = 0; k < 5; ++k) {
    const int cin = wd[4 - k];
    const int cout = k == 4 ? wd[0] : wd[3 - k];
    up_.push_back(make_block(cin, cout, 1));
  }
  head_ = nn::Conv2d<T>(wd[0], spec.out_channels, 3, {1, 1, 1});
  head_.init_normal(rng, init_std);
}

template <typename T>
Var<T> RefineNet<T>::run_block(const Block& b, const Var<T>& x, bool gates_open) const {
  Var<T> h = ops::relu(ops::instance_norm(b.conv1.forward(x)));
  h = ops::instance_norm(b.conv2.forward(h));
  if (spec_.channel_attention) h = b.attention.forward(h, gates_open);
  return ops::relu(ops::add(h, b.shortcut.forward(x)));
}

template <typename T>
Var<T> RefineNet<T>::forward(const Var<T>& x, bool force_gates_open) const {
  const auto s = x.shape();
  if (s.c != spec_.in_channels) {
    throw DimensionError("refine net expects " + std::to_string(spec_.in_channels) +
                         " input channels, got " + std::to_string(s.c));
  }
  if (s.h % 32 != 0 || s.w % 32 != 0) {
    throw DimensionError("refine net input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not a multiple of 32");
  }
  std::vector<Var<T>> levels;
  Var<T> h = ops::relu(ops::instance_norm(stem_.forward(x)));
  levels.push_back(h);
  for (const auto& b : down_) {
    h = run_block(b, h, force_gates_open);
    levels.push_back(h);
  }
  for (std::size_t k = 0; k < up_.size(); ++k) {
    h = run_block(up_[k], ops::upsample_nearest(h, 2), force_gates_open);
    if (spec_.skip_connections) h = ops::add(h, levels[levels.size() - 2 - k]);
  }
  return ops::sigmoid(head_.forward(h));
}

template <typename T>
nn::ParamList<T> RefineNet<T>::parameters() {
  nn::ParamList<T> out;
  stem_.collect("stem", out);
  auto collect_block = [&](Block& b, const std::string& name) {
    b.conv1.collect(name + ".conv1", out);
    b.conv2.collect(name + ".conv2", out);
    b.shortcut.collect(name + ".shortcut", out);
    if (spec_.channel_attention) b.attention.collect(name + ".attention", out);
  };
  for (std::size_t k = 0; k < down_.size(); ++k) collect_block(down_[k], "down" + std::to_string(k));
  for (std::size_t k = 0; k < up_.size(); ++k) collect_block(up_[k], "up" + std::to_string(k));
  head_.collect("head", out);
  return out;
}

template <typename T>
Var<T> refine_forward(const RefineNet<T>& net, const Var<T>& coarse, const Var<T>& image,
                      const Var<T>& flow, bool force_gates_open) {
  check_same_extent(coarse, image, "refine net");
  check_same_extent(coarse, flow, "refine net");
  return net.forward(ops::concat_channels<T>({coarse, image, flow}), force_gates_open);
}

// ---------------------------------------------------------------------------

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const DiscriminatorSpec& spec, nn::Rng& rng, T init_std)
    : spec_(spec) {
  int cin = spec.in_channels;
  for (const auto& l : spec.layers()) {
    nn::Conv2d<T> conv(cin, l.out_channels, l.kernel, {l.stride, l.pad, 1}, !spec.spectral_norm);
    conv.init_normal(rng, init_std);
    if (spec.spectral_norm) {
      conv.enable_spectral_norm(rng);
      conv.converge_power_iteration();
    }
    layers_.push_back(std::move(conv));
    cin = l.out_channels;
  }
}

template <typename T>
DiscriminatorOutput<T> PatchDiscriminator<T>::forward(const Var<T>& x) const {
  if (x.shape().c != spec_.in_channels) {
    throw DimensionError("discriminator expects " + std::to_string(spec_.in_channels) +
                         " channels, got " + std::to_string(x.shape().c));
  }
  DiscriminatorOutput<T> out;
  Var<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    h = i + 1 < layers_.size() ? ops::leaky_relu(h, static_cast<T>(spec_.leaky_slope)) : ops::sigmoid(h);
    out.features.push_back(h);
  }
  out.scores = h;
  return out;
}

template <typename T>
void PatchDiscriminator<T>::power_iterate(int iterations) {
  for (auto& l : layers_) l.power_iterate(iterations);
}

template <typename T>
void PatchDiscriminator<T>::converge_spectral_norm() {
  for (auto& l : layers_) l.converge_power_iteration();
}

template <typename T>
nn::ParamList<T> PatchDiscriminator<T>::parameters() {
  nn::ParamList<T> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("conv" + std::to_string(i + 1), out);
  return out;
}

template <typename T>
DiscriminatorOutput<T> discriminator_forward(const PatchDiscriminator<T>& net, const Var<T>& a,
                                             const Var<T>& b) {
  check_same_extent(a, b, "discriminator");
  return net.forward(ops::concat_channels<T>({a, b}));
}

#define FACEERASE_INSTANTIATE_MODELS(T)                                                           \
  template class ResnetGenerator<T>;                                                              \
  template class RefineNet<T>;                                                                    \
  template class PatchDiscriminator<T>;                                                           \
  template Var<T> edge_generator_forward<T>(const ResnetGenerator<T>&, const Var<T>&,            \
                                            const Var<T>&, const Var<T>&);                        \
  template Var<T> pixel_clone_forward<T>(const ResnetGenerator<T>&, const Var<T>&,               \
                                         const Var<T>&, const Var<T>&);                           \
  template Var<T> refine_forward<T>(const RefineNet<T>&, const Var<T>&, const Var<T>&,           \
                                    const Var<T>&, bool);                                         \
  template DiscriminatorOutput<T> discriminator_forward<T>(const PatchDiscriminator<T>&,         \
                                                           const Var<T>&, const Var<T>&);

FACEERASE_INSTANTIATE_MODELS(float)
FACEERASE_INSTANTIATE_MODELS(double)

#undef FACEERASE_INSTANTIATE_MODELS

}  // namespace faceerase::models
