#include "faceerase/models/forward.hpp"

namespace faceerase::models {

namespace ops = nn::ops;
using nn::Shape;
using nn::Tensor;

namespace {

template <typename R>
Tensor<float> stack(const std::vector<R>& items) {
  if (items.empty()) throw DimensionError("cannot batch zero images");
  const int h = items[0].height();
  const int w = items[0].width();
  constexpr int ch = R::kChannels;
  Tensor<float> t(Shape{static_cast<int>(items.size()), ch, h, w});
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (!items[n].same_size(h, w)) throw DimensionError("batch images differ in size");
    for (int c = 0; c < ch; ++c) {
      float* dst = t.plane(static_cast<int>(n), c);
      for (int r = 0; r < h; ++r)
        for (int x = 0; x < w; ++x) dst[r * w + x] = static_cast<float>(items[n].at(r, x, c));
    }
  }
  return t;
}

}  // namespace

Tensor<float> to_tensor(const std::vector<imaging::ImageRGB>& images) { return stack(images); }
Tensor<float> to_tensor(const std::vector<imaging::GrayImage>& images) { return stack(images); }
Tensor<float> to_tensor(const std::vector<imaging::EdgeMap>& maps) { return stack(maps); }
Tensor<float> to_tensor(const std::vector<imaging::BinaryMask>& masks) { return stack(masks); }

imaging::ImageRGB rgb_at(const Tensor<float>& t, int n) {
  const Shape& s = t.shape();
  if (s.c != 3) throw DimensionError("rgb_at needs a 3-channel tensor");
  imaging::ImageRGB out(s.h, s.w);
  for (int c = 0; c < 3; ++c) {
    const float* src = t.plane(n, c);
    for (int r = 0; r < s.h; ++r)
      for (int x = 0; x < s.w; ++x) out.at(r, x, c) = std::clamp(src[r * s.w + x], 0.0f, 1.0f);
  }
  return out;
}

imaging::GrayImage gray_at(const Tensor<float>& t, int n, int channel) {
  const Shape& s = t.shape();
  imaging::GrayImage out(s.h, s.w);
  const float* src = t.plane(n, channel);
  for (int r = 0; r < s.h; ++r)
    for (int x = 0; x < s.w; ++x) out.at(r, x) = src[r * s.w + x];
  return out;
}

MaskedInputs mask_inputs(const Tensor<float>& image, const Tensor<float>& gray, const Tensor<float>& edges,
                         const Tensor<float>& mask) {
  const Shape& s = mask.shape();
  if (s.c != 1 || image.shape() != Shape{s.n, 3, s.h, s.w} || gray.shape() != s || edges.shape() != s) {
    throw DimensionError("mask_inputs: inconsistent batch shapes");
  }
  Tensor<float> img = image;
  Tensor<float> g = gray;
  Tensor<float> e = edges;
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const float* m = mask.plane(n, 0);
    for (std::size_t i = 0; i < hw; ++i) {
      const float keep = 1.0f - m[i];
      for (int c = 0; c < 3; ++c) img.plane(n, c)[i] *= keep;
      g.plane(n, 0)[i] *= keep;
      e.plane(n, 0)[i] *= keep;
    }
  }
  return {Var<float>(std::move(img)), Var<float>(std::move(g)), Var<float>(std::move(e)), Var<float>(mask)};
}

Var<float> composite_edges(const Var<float>& raw, const MaskedInputs& in) {
  return ops::add(ops::mul(raw, in.mask), in.edges);
}

InpaintOutputs inpaint_forward(const Networks& nets, const MaskedInputs& in, bool force_gates_open) {
  InpaintOutputs out;
  {
    nn::NoGradGuard frozen;
    out.edges_raw = edge_generator_forward(nets.edge, in.gray, in.edges, in.mask);
    out.edges = composite_edges(out.edges_raw, in);
  }
  out.flow = pixel_clone_forward(nets.pixel_clone, out.edges, in.image, in.mask);
  out.warped = ops::warp(in.image, out.flow);
  out.refined = refine_forward(nets.refine, out.warped, in.image, out.flow, force_gates_open);
  out.composite = ops::add(ops::mul(out.refined, in.mask), in.image);
  return out;
}

}  // namespace faceerase::models
