// Reader and writer for the TNSA tensor archive.
//
//   bytes 0..7    "TNSA0001"
//   bytes 8..15   header length, u64 little-endian
//   header        UTF-8 JSON {name: {"dtype":"f32","shape":[...],"offset":o,"length":l}}
//   payload       little-endian f32 values; offsets are relative to the
//                 payload start and 8-byte aligned
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iclprobe/common.hpp"

namespace iclprobe {

inline constexpr char kArchiveMagic[8] = {'T', 'N', 'S', 'A', '0', '0', '0', '1'};

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
};

class TensorArchive {
 public:
  void put(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data) {
    Tensor t{std::move(shape), std::move(data)};
    for (auto d : t.shape) {
      if (d < 0) fail(ErrorCode::ShapeMismatch, name + ": negative dimension");
    }
    if (t.numel() != t.data.size()) {
      fail(ErrorCode::ShapeMismatch, name + ": shape holds " + std::to_string(t.numel()) + " values, got " +
                                         std::to_string(t.data.size()));
    }
    entries_[name] = std::move(t);
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) fail(ErrorCode::Malformed, "archive has no entry " + name);
    return it->second;
  }

  const std::map<std::string, Tensor>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, Tensor> entries_;
};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void put_f32_le(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline std::uint64_t align8(std::uint64_t v) { return (v + 7) & ~std::uint64_t{7}; }

}  // namespace detail

/// Entries are laid out in name order; the header is space-padded so the
/// payload starts on an 8-byte boundary.
inline std::string serialize_archive(const TensorArchive& archive) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.entries()) {
    const std::uint64_t length = t.data.size() * 4;
    header[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"length", length}};
    offset = detail::align8(offset + length);
  }
  std::string text = header.dump();
  while ((16 + text.size()) % 8 != 0) text.push_back(' ');

  std::string out(kArchiveMagic, 8);
  detail::put_u64_le(out, text.size());
  out += text;
  const std::size_t payload_start = out.size();
  for (const auto& [name, t] : archive.entries()) {
    out.resize(payload_start + header[name]["offset"].get<std::size_t>(), '\0');
    for (float f : t.data) detail::put_f32_le(out, f);
  }
  out.resize(payload_start + offset, '\0');
  return out;
}

inline TensorArchive parse_archive(const std::string& bytes, const std::string& origin = "<archive>") {
  auto bad = [&](const std::string& why) { fail(ErrorCode::Malformed, origin + ": " + why); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kArchiveMagic, 8) != 0) bad("missing TNSA0001 magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = detail::get_u64_le(raw + 8);
  if (header_len > bytes.size() - 16) bad("header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("header is not JSON: ") + e.what());
  }
  if (!header.is_object()) bad("header must be a JSON object");
  const std::uint64_t payload_start = 16 + header_len;
  const std::uint64_t payload_size = bytes.size() - payload_start;

  TensorArchive archive;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;
  for (const auto& [name, meta] : header.items()) {
    try {
      if (meta.at("dtype").get<std::string>() != "f32") bad(name + ": only f32 is supported");
      const auto shape = meta.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = meta.at("offset").get<std::uint64_t>();
      const auto length = meta.at("length").get<std::uint64_t>();
      std::uint64_t numel = 1;
      for (auto d : shape) {
        if (d < 0) bad(name + ": negative dimension");
        numel *= static_cast<std::uint64_t>(d);
      }
      if (length != numel * 4) bad(name + ": length does not match shape");
      if (offset % 8 != 0) bad(name + ": offset is not 8-byte aligned");
      if (offset > payload_size || length > payload_size - offset) bad(name + ": entry runs past the payload");
      extents.emplace_back(offset, offset + length);
      std::vector<float> data(numel);
      for (std::uint64_t i = 0; i < numel; ++i) data[i] = detail::get_f32_le(raw + payload_start + offset + 4 * i);
      archive.put(name, shape, std::move(data));
    } catch (const nlohmann::json::exception& e) {
      bad(name + ": " + e.what());
    }
  }
  std::sort(extents.begin(), extents.end());
  for (std::size_t i = 1; i < extents.size(); ++i) {
    if (extents[i].first < extents[i - 1].second) bad("entries overlap");
  }
  return archive;
}

inline void save_archive(const std::string& path, const TensorArchive& archive) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  const auto bytes = serialize_archive(archive);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

inline TensorArchive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_archive(buf.str(), path);
}

}  // namespace iclprobe
