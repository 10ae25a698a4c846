#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "faceerase/nn/layers.hpp"

namespace faceerase::nn {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Blob layout, all little-endian:
//   "FEPB" u32 version u32 count
//   count x { u32 name_len, name bytes, u32 ndim (=4), u32 dims[4], f32 data[] }
using NamedTensors = std::map<std::string, Tensor<float>>;

void write_blob(const std::filesystem::path& path, const std::vector<std::pair<std::string, Tensor<float>>>& tensors);
NamedTensors read_blob(const std::filesystem::path& path);

/// Parameters and buffers of a network, in collection order.
std::vector<std::pair<std::string, Tensor<float>>> snapshot(const ParamList<float>& list);
/// Copies blob contents into the list; every name must exist with the same shape.
void restore(ParamList<float>& list, const NamedTensors& tensors);

/// SHA-256 over names, shapes and raw values of all parameters and buffers.
std::string hash_parameters(const ParamList<float>& list);
std::string sha256_hex(const void* data, std::size_t size);

}  // namespace faceerase::nn
