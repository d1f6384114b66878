#include "chisep/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "chisep/errors.hpp"

namespace chisep {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
Checkpoint make_checkpoint(DualBranchNet<T>& net, const std::optional<NormStats>& norm, const nlohmann::json& meta) {
  Checkpoint c;
  c.network = net.config();
  c.norm = norm;
  c.meta = meta;
  for (Param<T>* p : net.all_tensors()) {
    NamedTensor t{p->name, p->shape, {}};
    t.values.reserve(p->size());
    for (T v : p->value) t.values.push_back(static_cast<float>(v));
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["network"] = ckpt.network.to_json();
  if (ckpt.norm) header["norm_stats"] = ckpt.norm->to_json();
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
    offset += t.values.size();
  }
  const std::string h = header.dump();
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(h.size()));
  buf += h;
  for (const auto& t : ckpt.tensors) {
    const std::size_t at = buf.size();
    buf.resize(at + t.values.size() * sizeof(float));
    std::memcpy(buf.data() + at, t.values.data(), t.values.size() * sizeof(float));
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed", tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16) throw FormatError("truncated checkpoint header", bytes.size());
  if (std::memcmp(p, kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) throw FormatError("bad checkpoint magic", 0);
  const std::uint32_t version = get_u32(p + 8);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  const std::uint64_t hlen = get_u32(p + 12);
  if (16 + hlen > bytes.size()) throw FormatError("truncated JSON header", bytes.size());

  Checkpoint c;
  std::uint64_t total = 0;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
    c.network = NetworkConfig::from_json(header.at("network"));
    if (header.contains("norm_stats")) c.norm = NormStats::from_json(header["norm_stats"]);
    if (header.contains("meta")) c.meta = header["meta"];
    for (const auto& t : header.at("tensors")) {
      NamedTensor nt{t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>(), {}};
      const std::uint64_t off = t.at("offset").get<std::uint64_t>();
      const std::uint64_t count = t.at("count").get<std::uint64_t>();
      if (off != total) throw FormatError("tensor '" + nt.name + "' offset out of sequence", 16);
      total += count;
      nt.values.resize(count);
      c.tensors.push_back(std::move(nt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what(), 16);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what(), 16);
  }
  const std::uint64_t payload_at = 16 + hlen;
  if (bytes.size() - payload_at != total * sizeof(float)) {
    throw FormatError("checkpoint payload size mismatch: expected " + std::to_string(total) + " float32 values",
                      payload_at);
  }
  std::uint64_t at = payload_at;
  for (auto& t : c.tensors) {
    std::memcpy(t.values.data(), bytes.data() + at, t.values.size() * sizeof(float));
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (!std::isfinite(t.values[i])) throw FormatError("non-finite value in tensor '" + t.name + "'", at + 4 * i);
    }
    at += t.values.size() * sizeof(float);
  }
  return c;
}

template <typename T>
void load_into(const Checkpoint& ckpt, DualBranchNet<T>& net) {
  const auto& nc = net.config();
  if (nc.base_channels != ckpt.network.base_channels) {
    throw InvalidArgument("checkpoint base_channels " + std::to_string(ckpt.network.base_channels) +
                          " does not match network " + std::to_string(nc.base_channels));
  }
  auto tensors = net.all_tensors();
  if (tensors.size() != ckpt.tensors.size()) {
    throw InvalidArgument("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, network expects " +
                          std::to_string(tensors.size()));
  }
  for (Param<T>* p : tensors) {
    const NamedTensor* t = ckpt.find(p->name);
    if (!t) throw InvalidArgument("checkpoint lacks tensor '" + p->name + "'");
    if (t->shape != p->shape) throw InvalidArgument("checkpoint tensor '" + p->name + "' has a different shape");
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] = static_cast<T>(t->values[i]);
  }
}

template Checkpoint make_checkpoint<float>(DualBranchNet<float>&, const std::optional<NormStats>&,
                                           const nlohmann::json&);
template Checkpoint make_checkpoint<double>(DualBranchNet<double>&, const std::optional<NormStats>&,
                                            const nlohmann::json&);
template void load_into<float>(const Checkpoint&, DualBranchNet<float>&);
template void load_into<double>(const Checkpoint&, DualBranchNet<double>&);

}  // namespace chisep
