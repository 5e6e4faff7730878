#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace gsh {

/// Versioned binary container: "GSHCKPT\0", u32 version, u64 manifest
/// size, JSON manifest, raw little-endian blobs, u64 FNV-1a checksum of
/// everything before it. The manifest lists each blob's name, dtype and
/// byte range.
inline constexpr std::uint32_t kContainerVersion = 1;

class ContainerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Blob {
  std::string name;
  std::string dtype;  // "f32", "f64", "i64", "u8"
  std::vector<std::uint8_t> bytes;

  template <class T>
  static Blob from(std::string name, std::span<const T> values);
  template <class T>
  std::vector<T> as() const;
};

struct Container {
  nlohmann::json manifest;
  std::vector<Blob> blobs;

  /// Throws ContainerError if absent.
  const Blob& blob(const std::string& name) const;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

std::vector<std::uint8_t> encode_container(const Container& c);
/// Throws ContainerError on bad magic, version mismatch, truncation or a
/// checksum mismatch.
Container decode_container(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary sibling and renames it over `path`.
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

template <class T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else if constexpr (std::is_same_v<T, double>) return "f64";
  else if constexpr (std::is_same_v<T, std::int64_t>) return "i64";
  else {
    static_assert(std::is_same_v<T, std::uint8_t>, "unsupported blob element type");
    return "u8";
  }
}

template <class T>
Blob Blob::from(std::string name, std::span<const T> values) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  Blob b{std::move(name), dtype_name<T>(), std::vector<std::uint8_t>(values.size() * sizeof(T))};
  if (!values.empty()) std::memcpy(b.bytes.data(), values.data(), b.bytes.size());
  return b;
}

template <class T>
std::vector<T> Blob::as() const {
  if (dtype != dtype_name<T>()) throw ContainerError("blob " + name + " has dtype " + dtype);
  if (bytes.size() % sizeof(T) != 0) throw ContainerError("blob " + name + " has a partial element");
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace gsh
