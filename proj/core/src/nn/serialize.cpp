#include "faceerase/nn/serialize.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace faceerase::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

constexpr char kMagic[4] = {'F', 'E', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("truncated blob");
  return v;
}

Tensor<float> buffer_tensor(const std::vector<float>& data) {
  return Tensor<float>(Shape{1, 1, 1, static_cast<int>(data.size())}, data);
}

}  // namespace

void write_blob(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, Tensor<float>>>& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(out, 4);
      const Shape& s = t.shape();
      for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
    }
    if (!out) throw FormatError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

NamedTensors read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a parameter blob: " + path.string());
  }
  if (get_u32(in) != kVersion) throw FormatError("unsupported blob version in " + path.string());
  const std::uint32_t count = get_u32(in);
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in);
    if (len > 4096) throw FormatError("implausible tensor name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("truncated blob");
    if (get_u32(in) != 4) throw FormatError("tensor " + name + " is not 4-d");
    std::array<int, 4> d{};
    for (int& x : d) x = static_cast<int>(get_u32(in));
    Tensor<float> t(Shape{d[0], d[1], d[2], d[3]});
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 4))) {
      throw FormatError("truncated data for " + name);
    }
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor<float>>> snapshot(const ParamList<float>& list) {
  std::vector<std::pair<std::string, Tensor<float>>> out;
  for (const auto& p : list.params) out.emplace_back(p.name, p.var->value());
  for (const auto& b : list.buffers) out.emplace_back(b.name, buffer_tensor(*b.data));
  return out;
}

void restore(ParamList<float>& list, const NamedTensors& tensors) {
  for (auto& p : list.params) {
    const auto it = tensors.find(p.name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks " + p.name);
    if (it->second.shape() != p.var->shape()) {
      throw FormatError("shape mismatch for " + p.name + ": checkpoint " + it->second.shape().str() +
                        ", network " + p.var->shape().str());
    }
    p.var->mutable_value() = it->second;
  }
  for (auto& b : list.buffers) {
    const auto it = tensors.find(b.name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks " + b.name);
    if (it->second.size() != b.data->size()) throw FormatError("size mismatch for " + b.name);
    b.data->assign(it->second.span().begin(), it->second.span().end());
  }
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

std::string hash_parameters(const ParamList<float>& list) {
  std::string bytes;
  auto append = [&](const std::string& name, std::span<const float> values, const Shape& s) {
    bytes += name;
    bytes += s.str();
    bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  };
  for (const auto& p : list.params) append(p.name, p.var->value().span(), p.var->shape());
  for (const auto& b : list.buffers) {
    append(b.name, *b.data, Shape{1, 1, 1, static_cast<int>(b.data->size())});
  }
  return sha256_hex(bytes.data(), bytes.size());
}

}  // namespace faceerase::nn
