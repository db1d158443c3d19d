#include "seiznet/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "seiznet/error.hpp"

namespace seiznet {

namespace {

constexpr char kMagic[4] = {'S', 'Z', 'N', 'T'};

template <typename T>
void write_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  char bytes[sizeof(T)];
  in.read(bytes, sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

const Tensor* Container::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string Container::config_value(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) {
    throw FormatError("container config misses key '" + key + "'");
  }
  return it->second;
}

std::string canonical_config_text(
    const std::map<std::string, std::string>& config) {
  std::string text;
  for (const auto& [key, value] : config) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  }
  return text;
}

void write_container(const std::string& path, const Container& container) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, kContainerVersion);
    const std::string config = canonical_config_text(container.config);
    write_le<std::uint64_t>(out, config.size());
    out.write(config.data(), static_cast<std::streamsize>(config.size()));
    write_le<std::uint32_t>(out,
                            static_cast<std::uint32_t>(container.tensors.size()));
    for (const auto& [name, tensor] : container.tensors) {
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
      for (std::size_t e : tensor.shape()) {
        write_le<std::uint64_t>(out, e);
      }
      // Contiguous doubles; one write (little-endian host assumed, as for
      // every other field).
      out.write(reinterpret_cast<const char*>(tensor.data()),
                static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) throw FormatError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("'" + path + "' lacks the SZNT magic");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kContainerVersion) {
    throw FormatError("'" + path + "' has unsupported version " +
                      std::to_string(version));
  }
  const auto config_len = read_le<std::uint64_t>(in);
  std::string config_text(config_len, '\0');
  in.read(config_text.data(), static_cast<std::streamsize>(config_len));

  Container container;
  std::size_t pos = 0;
  while (pos < config_text.size()) {
    const std::size_t eol = config_text.find('\n', pos);
    const std::string line =
        config_text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? config_text.size() : eol + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("'" + path + "' config line lacks '=': " + line);
    }
    container.config[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const auto n_tensors = read_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = read_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_le<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape[r] = read_le<std::uint64_t>(in);
      total *= shape[r];
    }
    std::vector<double> data(total);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw FormatError("'" + path + "' is truncated");
    container.tensors.emplace_back(std::move(name),
                                   Tensor(std::move(shape), std::move(data)));
  }
  return container;
}

}  // namespace seiznet
