#ifndef LVE_GAN_MODEL_IO_HPP
#define LVE_GAN_MODEL_IO_HPP

// Generator model file: one line of JSON manifest, '\n', then the weight blob
// (little-endian float32, tensors concatenated in manifest order). The
// manifest carries the blob's byte count and CRC-32.

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lve/corpus.hpp"
#include "lve/gan/networks.hpp"

namespace lve::gan {

inline constexpr char kModelFormat[] = "lve-generator";
inline constexpr int kModelVersion = 1;

inline std::uint32_t crc32_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline nlohmann::json model_manifest(Generator<float>& gen, std::string* blob_out = nullptr) {
  nlohmann::json tensors = nlohmann::json::array();
  const auto names = gen.state_names();
  const auto states = gen.state_tensors();
  std::ostringstream bytes;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i]->shape();
    tensors.push_back({{"name", names[i]}, {"shape", {s.n, s.c, s.h, s.w}}});
    for (float v : states[i]->values()) lve::detail::put_f32(bytes, v);
  }
  std::string blob = bytes.str();
  nlohmann::json m = {
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"architecture", kGeneratorArchitecture},
      {"latent_dim", kLatentDim},
      {"output_shape", {kTileCount, kPaddedSize, kPaddedSize}},
      {"seed", gen.seed()},
      {"iterations", gen.iterations()},
      {"tensors", tensors},
      {"blob_bytes", blob.size()},
      {"crc32", crc32_of(blob)},
  };
  if (blob_out) *blob_out = std::move(blob);
  return m;
}

inline void save_model(const Generator<float>& model, const std::string& path) {
  Generator<float> copy = model;
  std::string blob;
  const nlohmann::json manifest = model_manifest(copy, &blob);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file: " + path);
  out << manifest.dump() << '\n';
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed: " + path);
}

/// Reads only the manifest line.
inline nlohmann::json read_model_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatVersionMismatch("model file has no manifest: " + path);
  nlohmann::json m = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (m.is_discarded() || !m.is_object()) throw FormatVersionMismatch("unreadable model manifest: " + path);
  return m;
}

namespace detail {

inline Generator<float> load_model_unchecked(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatVersionMismatch("model file has no manifest: " + path);
  const nlohmann::json m = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (m.is_discarded() || !m.is_object()) throw FormatVersionMismatch("unreadable model manifest: " + path);
  if (m.value("format", "") != kModelFormat || m.value("version", -1) != kModelVersion)
    throw FormatVersionMismatch("unsupported model format/version in " + path);
  if (m.value("architecture", "") != kGeneratorArchitecture || m.value("latent_dim", -1) != kLatentDim)
    throw FormatVersionMismatch("model architecture does not match this build: " + path);

  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected_bytes = m.value("blob_bytes", std::uint64_t{0});
  if (blob.size() != expected_bytes || crc32_of(blob) != m.value("crc32", std::uint32_t{0}))
    throw ChecksumMismatch("model weights are corrupt or truncated: " + path);

  Generator<float> gen(m.value("seed", std::uint64_t{0}));
  gen.set_iterations(m.value("iterations", 0L));
  const auto states = gen.state_tensors();
  const auto& tensors = m.at("tensors");
  if (tensors.size() != states.size()) throw FormatVersionMismatch("tensor count mismatch in " + path);
  std::size_t total = 0;
  for (const auto* t : states) total += t->size() * 4;
  if (total != blob.size()) throw FormatVersionMismatch("weight blob size does not match architecture: " + path);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto shape = tensors[i].at("shape").get<std::vector<int>>();
    const auto& s = states[i]->shape();
    if (shape != std::vector<int>{s.n, s.c, s.h, s.w})
      throw FormatVersionMismatch("tensor shape mismatch for " + tensors[i].value("name", std::string{}));
    for (auto& v : states[i]->values()) {
      v = lve::detail::get_f32(reinterpret_cast<const unsigned char*>(blob.data()) + offset);
      offset += 4;
    }
  }
  return gen;
}

}  // namespace detail

inline Generator<float> load_model(const std::string& path) {
  try {
    return detail::load_model_unchecked(path);
  } catch (const nlohmann::json::exception& e) {
    throw FormatVersionMismatch("malformed model manifest in " + path + ": " + e.what());
  }
}

}  // namespace lve::gan

#endif  // LVE_GAN_MODEL_IO_HPP
