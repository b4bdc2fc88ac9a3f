#include "ptaco/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <unordered_map>

#include "ptaco/binary_io.hpp"
#include "ptaco/error.hpp"

namespace ptaco {

namespace io {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("short write to '" + path + "'");
}

}  // namespace io

std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& records) {
  io::ByteWriter w;
  w.text(std::string_view(kCheckpointMagic, 8));
  w.u8(kCheckpointVersion);
  for (const NamedTensor& r : records) {
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.text(r.name);
    w.u32(static_cast<std::uint32_t>(r.tensor.rank()));
    for (std::size_t e : r.tensor.shape()) w.u64(e);
    for (double v : r.tensor.values()) w.f64(v);
  }
  return w.buffer();
}

std::vector<NamedTensor> decode_checkpoint(std::vector<unsigned char> bytes) {
  io::ByteReader r(std::move(bytes), "checkpoint");
  r.expect_bytes(std::string_view(kCheckpointMagic, 8));
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<NamedTensor> out;
  while (!r.at_end()) {
    const std::uint32_t len = r.u32();
    r.need_items(len, 1);
    std::string name = r.text(len);
    const std::uint32_t rank = r.u32();
    r.need_items(rank, 8);
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0) throw FormatError("checkpoint: zero extent in '" + name + "'");
      r.need_items(count * e, 8);
      count *= e;
    }
    std::vector<double> values(count);
    for (double& v : values) v = r.f64();
    out.push_back({std::move(name), Tensor::from_vector(shape, std::move(values))});
  }
  return out;
}

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& records) {
  io::write_file(path, encode_checkpoint(records));
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path));
}

std::vector<NamedTensor> snapshot(const ParameterStore& store) {
  std::vector<NamedTensor> out;
  for (const Parameter& p : store.parameters()) out.push_back({p.name, p.tensor.detach()});
  return out;
}

void restore(ParameterStore& store, const std::vector<NamedTensor>& records) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& r : records) by_name[r.name] = &r;
  for (Parameter& p : store.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second->tensor.shape() != p.tensor.shape()) {
      throw FormatError("checkpoint shape " + shape_str(it->second->tensor.shape()) + " for '" +
                        p.name + "' does not match " + shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    auto src = it->second->tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace ptaco
