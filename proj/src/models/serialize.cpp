#include "opgan/serialize.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "opgan/error.hpp"

namespace opgan::models {

namespace {

constexpr std::uint8_t kMagic[4] = {'O', 'P', 'G', 'N'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

const std::vector<double>& Container::blob(const std::string& name) const {
  for (const auto& b : blobs) {
    if (b.name == name) return b.values;
  }
  throw DecodeError("missing blob '" + name + "'", 0);
}

std::vector<std::uint8_t> encode_container(nlohmann::json manifest,
                                           const std::vector<NamedBlob>& blobs) {
  auto entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& b : blobs) {
    entries.push_back({{"name", b.name}, {"offset", offset}, {"count", b.values.size()}});
    offset += 8 * b.values.size();
  }
  manifest["format_version"] = kFormatVersion;
  manifest["blobs"] = std::move(entries);
  const std::string text = manifest.dump(1);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + text.size() + offset);
  for (auto m : kMagic) out.push_back(m);
  put_u32(out, kFormatVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& b : blobs) {
    for (double v : b.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw DecodeError("file shorter than header", bytes.size());
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw DecodeError("bad magic, not an OPGN container", 0);
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kFormatVersion) {
    throw DecodeError("unsupported format version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")",
                      4);
  }
  const std::uint64_t mlen = get_le(bytes, 8, 8);
  if (mlen > bytes.size() - kHeaderSize) {
    throw DecodeError("manifest runs past end of file", bytes.size());
  }
  Container c;
  try {
    c.manifest = nlohmann::json::parse(bytes.begin() + kHeaderSize,
                                       bytes.begin() + kHeaderSize + static_cast<long>(mlen));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed manifest: ") + e.what(), kHeaderSize);
  }
  const std::size_t base = kHeaderSize + mlen;
  const std::size_t available = bytes.size() - base;
  std::uint64_t expected = 0;
  try {
    if (c.manifest.at("format_version").get<std::uint32_t>() != version) {
      throw DecodeError("manifest version disagrees with header", kHeaderSize);
    }
    for (const auto& e : c.manifest.at("blobs")) {
      NamedBlob b;
      b.name = e.at("name").get<std::string>();
      const auto off = e.at("offset").get<std::uint64_t>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (off != expected) throw DecodeError("blob '" + b.name + "' is not contiguous", base + off);
      if (count > (available - off) / 8) {
        throw DecodeError("truncated blob '" + b.name + "'", bytes.size());
      }
      b.values.resize(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        b.values[i] = std::bit_cast<double>(get_le(bytes, base + off + 8 * i, 8));
      }
      expected = off + 8 * count;
      c.blobs.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed manifest: ") + e.what(), kHeaderSize);
  }
  if (expected != available) {
    throw DecodeError("trailing bytes after last blob", base + expected);
  }
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// JSON mapping

nlohmann::json to_json(const ArchitectureConfig& a) {
  return {{"order", a.order},
          {"seed", a.seed},
          {"generator_widths", a.generator_widths},
          {"encoder_kernels", a.encoder_kernels},
          {"decoder_kernel", a.decoder_kernel},
          {"upsample", a.upsample == ad::UpsampleMode::kNearest ? "nearest" : "linear"},
          {"discriminator_widths", a.discriminator_widths},
          {"discriminator_kernel", a.discriminator_kernel},
          {"discriminator_strides", a.discriminator_strides},
          {"conditional_discriminator", a.conditional_discriminator}};
}

ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
  ArchitectureConfig a;
  auto take = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  take("order", a.order);
  take("seed", a.seed);
  take("generator_widths", a.generator_widths);
  take("encoder_kernels", a.encoder_kernels);
  take("decoder_kernel", a.decoder_kernel);
  if (j.contains("upsample")) {
    const auto u = j.at("upsample").get<std::string>();
    if (u == "nearest") a.upsample = ad::UpsampleMode::kNearest;
    else if (u == "linear") a.upsample = ad::UpsampleMode::kLinear;
    else throw ConfigError("unknown upsample mode '" + u + "'");
  }
  take("discriminator_widths", a.discriminator_widths);
  take("discriminator_kernel", a.discriminator_kernel);
  take("discriminator_strides", a.discriminator_strides);
  take("conditional_discriminator", a.conditional_discriminator);
  return a;
}

nlohmann::json to_json(const OperationalLayerSpec& s) {
  return {{"in_channels", s.in_channels}, {"out_channels", s.out_channels},
          {"kernel", s.kernel},           {"order", s.order},
          {"stride", s.stride},           {"pad", s.pad},
          {"activation", to_string(s.activation)}, {"leaky_slope", s.leaky_slope}};
}

OperationalLayerSpec layer_spec_from_json(const nlohmann::json& j) {
  OperationalLayerSpec s;
  j.at("in_channels").get_to(s.in_channels);
  j.at("out_channels").get_to(s.out_channels);
  j.at("kernel").get_to(s.kernel);
  j.at("order").get_to(s.order);
  j.at("stride").get_to(s.stride);
  j.at("pad").get_to(s.pad);
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  j.at("leaky_slope").get_to(s.leaky_slope);
  return s;
}

ModelManifest manifest_from_json(const nlohmann::json& j) {
  ModelManifest m;
  m.format_version = j.at("format_version").get<std::uint32_t>();
  m.kind = j.at("kind").get<std::string>();
  m.arch = architecture_from_json(j.at("arch"));
  for (const auto& l : j.at("layers")) m.layers.push_back(layer_spec_from_json(l));
  m.parameter_count = j.at("parameter_count").get<std::size_t>();
  for (const auto& b : j.at("blobs")) {
    m.blobs.push_back({b.at("name").get<std::string>(), b.at("offset").get<std::uint64_t>(),
                       b.at("count").get<std::uint64_t>()});
  }
  return m;
}

// ---------------------------------------------------------------------------
// models

void append_layer_blobs(const LayerStack& model, const std::string& prefix,
                        std::vector<NamedBlob>& blobs) {
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto w = layers[i].weights().value().values();
    const auto b = layers[i].bias().value().values();
    blobs.push_back({prefix + "layer." + std::to_string(i) + ".weights", {w.begin(), w.end()}});
    blobs.push_back({prefix + "layer." + std::to_string(i) + ".bias", {b.begin(), b.end()}});
  }
}

void restore_layer_blobs(LayerStack& model, const std::string& prefix, const Container& c) {
  auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (auto [suffix, var] : {std::pair{".weights", &layers[i].weights()},
                               std::pair{".bias", &layers[i].bias()}}) {
      const std::string name = prefix + "layer." + std::to_string(i) + suffix;
      const auto& v = c.blob(name);
      auto dst = var->mutable_value().values();
      if (v.size() != dst.size()) {
        throw DecodeError("blob '" + name + "' has " + std::to_string(v.size()) +
                              " values, layer needs " + std::to_string(dst.size()),
                          0);
      }
      std::copy(v.begin(), v.end(), dst.begin());
    }
  }
}

nlohmann::json model_section(const LayerStack& model, const std::string& kind) {
  auto layers = nlohmann::json::array();
  for (const auto& l : model.layers()) layers.push_back(to_json(l.spec()));
  return {{"kind", kind},
          {"arch", to_json(model.arch())},
          {"seed", model.arch().seed},
          {"order", model.arch().order},
          {"layers", std::move(layers)},
          {"parameter_count", model.parameter_count()}};
}

namespace {

template <typename Model>
std::vector<std::uint8_t> encode(const Model& model, const std::string& kind) {
  std::vector<NamedBlob> blobs;
  append_layer_blobs(model, "", blobs);
  return encode_container(model_section(model, kind), blobs);
}

template <typename Model>
Model decode(std::span<const std::uint8_t> bytes, const std::string& kind) {
  Container c = decode_container(bytes);
  try {
    if (c.manifest.at("kind").get<std::string>() != kind) {
      throw DecodeError("container holds a '" + c.manifest.at("kind").get<std::string>() +
                            "', expected '" + kind + "'",
                        kHeaderSize);
    }
    Model model(architecture_from_json(c.manifest.at("arch")), false);
    const auto& specs = c.manifest.at("layers");
    if (specs.size() != model.layers().size()) {
      throw DecodeError("manifest layer count does not match architecture", kHeaderSize);
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!(layer_spec_from_json(specs[i]) == model.layers()[i].spec())) {
        throw DecodeError("layer " + std::to_string(i) + " spec does not match architecture",
                          kHeaderSize);
      }
    }
    restore_layer_blobs(model, "", c);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed manifest: ") + e.what(), kHeaderSize);
  } catch (const ConfigError& e) {
    throw DecodeError(std::string("invalid architecture in manifest: ") + e.what(), kHeaderSize);
  }
}

template <typename Model>
ModelManifest save(const Model& model, const std::string& path, const std::string& kind) {
  const auto bytes = encode(model, kind);
  write_file_atomic(path, bytes);
  return manifest_from_json(decode_container(bytes).manifest);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const Generator& model) { return encode(model, "generator"); }

ModelManifest save_model(const Generator& model, const std::string& path) {
  return save(model, path, "generator");
}

ModelManifest save_model(const Discriminator& model, const std::string& path) {
  return save(model, path, "discriminator");
}

Generator decode_generator(std::span<const std::uint8_t> bytes) {
  return decode<Generator>(bytes, "generator");
}

Generator load_generator(const std::string& path) {
  return decode_generator(read_file_bytes(path));
}

Discriminator load_discriminator(const std::string& path) {
  return decode<Discriminator>(read_file_bytes(path), "discriminator");
}

}  // namespace opgan::models
