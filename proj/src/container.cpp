#include "gsh/container.hpp"

#include <array>
#include <fstream>
#include <iterator>

namespace gsh {

namespace {

constexpr std::array<char, 8> kMagic{'G', 'S', 'H', 'C', 'K', 'P', 'T', '\0'};

template <class U>
void put(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <class U>
U get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (in.size() < pos + sizeof(U)) throw ContainerError("checkpoint truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(in[pos + i]) << (8 * i));
  pos += sizeof(U);
  return value;
}

}  // namespace

const Blob& Container::blob(const std::string& name) const {
  for (const Blob& b : blobs) {
    if (b.name == name) return b;
  }
  throw ContainerError("checkpoint has no blob named " + name);
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t h) {
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  nlohmann::json manifest = c.manifest;
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Blob& b : c.blobs) {
    index.push_back({{"name", b.name}, {"dtype", b.dtype}, {"offset", offset}, {"size", b.bytes.size()}});
    offset += b.bytes.size();
  }
  manifest["blobs"] = index;
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Blob& b : c.blobs) out.insert(out.end(), b.bytes.begin(), b.bytes.end());
  put<std::uint64_t>(out, fnv1a64(out.data(), out.size()));
  return out;
}

Container decode_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw ContainerError("not a checkpoint file (bad magic)");
  }
  std::size_t pos = kMagic.size();
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion) {
    throw ContainerError("checkpoint version " + std::to_string(version) + " is incompatible with version " +
                         std::to_string(kContainerVersion));
  }
  if (bytes.size() < 8 + pos) throw ContainerError("checkpoint truncated");
  const std::size_t body = bytes.size() - 8;
  std::size_t tail = body;
  const auto stored = get<std::uint64_t>(bytes, tail);
  if (stored != fnv1a64(bytes.data(), body)) throw ContainerError("checkpoint checksum mismatch (truncated or corrupt)");

  const auto manifest_size = get<std::uint64_t>(bytes, pos);
  if (manifest_size > body - pos) throw ContainerError("checkpoint truncated");
  Container c;
  try {
    c.manifest = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("checkpoint manifest unreadable: ") + e.what());
  }
  pos += manifest_size;
  const std::size_t data_begin = pos;
  for (const auto& entry : c.manifest.at("blobs")) {
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto size = entry.at("size").get<std::uint64_t>();
    if (offset + size > body - data_begin) throw ContainerError("checkpoint blob out of range");
    Blob b;
    b.name = entry.at("name").get<std::string>();
    b.dtype = entry.at("dtype").get<std::string>();
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(data_begin + offset);
    b.bytes.assign(first, first + static_cast<std::ptrdiff_t>(size));
    c.blobs.push_back(std::move(b));
  }
  c.manifest.erase("blobs");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode_container(c);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContainerError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace gsh
