#pragma once

#include <vector>

#include "faceerase/imaging/image.hpp"
#include "faceerase/models/bundle.hpp"

namespace faceerase::models {

// Raster <-> NCHW batch conversion.
nn::Tensor<float> to_tensor(const std::vector<imaging::ImageRGB>& images);
nn::Tensor<float> to_tensor(const std::vector<imaging::GrayImage>& images);
nn::Tensor<float> to_tensor(const std::vector<imaging::EdgeMap>& maps);
nn::Tensor<float> to_tensor(const std::vector<imaging::BinaryMask>& masks);
imaging::ImageRGB rgb_at(const nn::Tensor<float>& t, int n);
imaging::GrayImage gray_at(const nn::Tensor<float>& t, int n, int channel = 0);

/// Network inputs with the hole already blanked: image * (1 - M), etc.
struct MaskedInputs {
  Var<float> image;  // (N,3,H,W)
  Var<float> gray;   // (N,1,H,W)
  Var<float> edges;  // (N,1,H,W) Canny of the unmasked gray, times (1 - M)
  Var<float> mask;   // (N,1,H,W), 1 = hole
};

/// Blanks the hole of ground-truth batches.
MaskedInputs mask_inputs(const nn::Tensor<float>& image, const nn::Tensor<float>& gray,
                         const nn::Tensor<float>& edges, const nn::Tensor<float>& mask);

struct InpaintOutputs {
  Var<float> edges_raw;   // G^edge output
  Var<float> edges;       // raw inside the hole, known edges outside
  Var<float> flow;        // (N,2,H,W)
  Var<float> warped;      // warp(I, F), the coarse result
  Var<float> refined;     // G^ref output
  Var<float> composite;   // refined * M + I * (1 - M)
};

/// Completed edges re-composited with the known edges.
Var<float> composite_edges(const Var<float>& raw, const MaskedInputs& in);

/// Full three-stage pass. The edge stage never records a tape, so its
/// weights cannot receive gradients from the later stages.
InpaintOutputs inpaint_forward(const Networks& nets, const MaskedInputs& in, bool force_gates_open = false);

}  // namespace faceerase::models
