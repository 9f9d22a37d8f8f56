#pragma once

// Binary model container:
//
//   "OPGN" | u32 format version | u64 manifest length | manifest (JSON text)
//   | little-endian f64 blobs, concatenated in manifest order
//
// The manifest lists every blob as {name, offset, count}; offsets are bytes
// from the start of the blob section.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "opgan/models.hpp"

namespace opgan::models {

inline constexpr std::uint32_t kFormatVersion = 1;

struct BlobEntry {
  std::string name;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

struct NamedBlob {
  std::string name;
  std::vector<double> values;
};

struct Container {
  nlohmann::json manifest;
  std::vector<NamedBlob> blobs;

  /// Throws DecodeError when absent.
  const std::vector<double>& blob(const std::string& name) const;
};

/// Fills manifest["blobs"] and manifest["format_version"].
std::vector<std::uint8_t> encode_container(nlohmann::json manifest,
                                           const std::vector<NamedBlob>& blobs);
/// Rejects bad magic, foreign versions, malformed manifests and truncated or
/// oversized blob sections; never returns a partial container.
Container decode_container(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
/// Writes to "<path>.tmp" then renames over path.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, const std::string& text);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

nlohmann::json to_json(const ArchitectureConfig& arch);
ArchitectureConfig architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OperationalLayerSpec& spec);
OperationalLayerSpec layer_spec_from_json(const nlohmann::json& j);

struct ModelManifest {
  std::uint32_t format_version = kFormatVersion;
  std::string kind;  // "generator" | "discriminator"
  ArchitectureConfig arch;
  std::vector<OperationalLayerSpec> layers;
  std::size_t parameter_count = 0;
  std::vector<BlobEntry> blobs;
};

ModelManifest manifest_from_json(const nlohmann::json& j);

/// Appends "<prefix>layer.<i>.weights" / ".bias" blobs for every layer.
void append_layer_blobs(const LayerStack& model, const std::string& prefix,
                        std::vector<NamedBlob>& blobs);
/// Copies blobs written by append_layer_blobs back into a model of the same shape.
void restore_layer_blobs(LayerStack& model, const std::string& prefix, const Container& c);

nlohmann::json model_section(const LayerStack& model, const std::string& kind);

ModelManifest save_model(const Generator& model, const std::string& path);
ModelManifest save_model(const Discriminator& model, const std::string& path);
std::vector<std::uint8_t> encode_model(const Generator& model);

Generator load_generator(const std::string& path);
Generator decode_generator(std::span<const std::uint8_t> bytes);
Discriminator load_discriminator(const std::string& path);

}  // namespace opgan::models
