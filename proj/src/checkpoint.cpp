#include "radgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace radgan {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'D', 'G', 'A', 'N', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated checkpoint " + path);
  return v;
}

void copy_into(const std::string& name, const Tensor& src, Tensor& dst) {
  if (src.shape() != dst.shape()) {
    throw std::runtime_error("checkpoint tensor " + name + " has shape " + shape_string(src.shape()) + ", expected " +
                             shape_string(dst.shape()));
  }
  dst.storage() = src.storage();
}

const Tensor& lookup(const Archive& archive, const std::string& name) {
  auto it = archive.tensors.find(name);
  if (it == archive.tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + name);
  return it->second;
}

}  // namespace

void write_archive(const std::string& path, const Archive& archive) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, sizeof kMagic);
    put<uint32_t>(out, kCheckpointVersion);
    const std::string header = archive.header.dump();
    put<uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<uint64_t>(out, archive.tensors.size());
    for (const auto& [name, t] : archive.tensors) {
      put<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
      for (int64_t d : t.shape()) put<int64_t>(out, d);
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint into " + path);
}

Archive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file");
  }
  const auto version = get<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) + " in " + path + ", expected " +
                             std::to_string(kCheckpointVersion));
  }
  Archive a;
  std::string header(get<uint64_t>(in, path), '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header.size()))) throw std::runtime_error("truncated checkpoint " + path);
  a.header = nlohmann::json::parse(header);
  const auto count = get<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name(get<uint32_t>(in, path), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw std::runtime_error("truncated checkpoint " + path);
    Shape shape(get<uint32_t>(in, path));
    for (auto& d : shape) d = get<int64_t>(in, path);
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)))) {
      throw std::runtime_error("truncated checkpoint " + path);
    }
    a.tensors.emplace(std::move(name), std::move(t));
  }
  return a;
}

void store_tensors(Archive& archive, const std::vector<nn::NamedParam>& params) {
  for (const auto& p : params) archive.tensors[p.name] = p.var->value();
}

void store_tensors(Archive& archive, const std::vector<nn::NamedBuffer>& buffers) {
  for (const auto& b : buffers) archive.tensors[b.name] = *b.tensor;
}

void restore_tensors(const Archive& archive, const std::vector<nn::NamedParam>& params) {
  for (const auto& p : params) copy_into(p.name, lookup(archive, p.name), p.var->value_mut());
}

void restore_tensors(const Archive& archive, const std::vector<nn::NamedBuffer>& buffers) {
  for (const auto& b : buffers) copy_into(b.name, lookup(archive, b.name), *b.tensor);
}

void require_fingerprint(const Archive& archive, const std::string& expected, const std::string& path) {
  const std::string found = archive.header.value("fingerprint", std::string());
  if (found != expected) {
    throw std::runtime_error("config fingerprint mismatch for " + path + ": checkpoint " + found + ", current config " +
                             expected);
  }
}

}  // namespace radgan
