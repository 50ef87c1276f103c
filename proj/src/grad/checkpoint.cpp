#include "ispw/grad/checkpoint.hpp"

#include "ispw/binary_io.hpp"

namespace ispw::grad {

namespace {
constexpr std::uint32_t kVersion = 1;
}

std::vector<std::uint8_t> encode_checkpoint(const ParamSet<float>& params) {
  std::vector<std::uint8_t> out{'I', 'S', 'P', 'W'};
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (name.size() > 0xFFFF) throw ParameterError("parameter name too long: " + name.substr(0, 32) + "...");
    if (t.rank() > 255) throw DimensionError("parameter '" + name + "' has rank > 255");
    binio::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) binio::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) binio::put_f32(out, v);
  }
  return out;
}

ParamSet<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  binio::Reader rd(bytes, "checkpoint");
  if (rd.str(4) != "ISPW") throw FormatError("checkpoint: bad magic at byte offset 0");
  const std::uint32_t version = rd.u32();
  if (version != kVersion) rd.fail("unsupported version " + std::to_string(version));
  const std::uint32_t count = rd.u32();
  ParamSet<float> out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t len = rd.u16();
    std::string name = rd.str(len);
    const std::uint8_t rank = rd.u8();
    Shape shape(rank);
    for (auto& d : shape) d = rd.u32();
    const std::size_t n = shape_numel(shape);
    rd.need(4 * n);
    std::vector<float> data(n);
    for (float& v : data) v = rd.f32();
    if (out.contains(name)) rd.fail("duplicate entry '" + name + "'");
    out.add(name, Tensor<float>(std::move(shape), std::move(data)));
  }
  if (rd.remaining() != 0) rd.fail("trailing bytes after last entry");
  return out;
}

void save_checkpoint(const std::string& path, const ParamSet<float>& params) {
  binio::write_file(path, encode_checkpoint(params));
}

ParamSet<float> load_checkpoint(const std::string& path) { return decode_checkpoint(binio::read_file(path)); }

void assign_params(ParamSet<float>& dst, const ParamSet<float>& src, const std::string& prefix) {
  for (auto& [name, t] : dst) {
    const auto& s = src.at(prefix + name);
    if (s.shape() != t.shape()) {
      throw DimensionError("checkpoint entry '" + prefix + name + "' has shape " + shape_str(s.shape()) +
                           ", model expects " + shape_str(t.shape()));
    }
    t = s;
  }
}

ParamSet<float> strip_prefix(const ParamSet<float>& src, const std::string& prefix) {
  ParamSet<float> out;
  for (const auto& [name, t] : src) {
    if (name.rfind(prefix, 0) == 0) out.add(name.substr(prefix.size()), t);
  }
  return out;
}

ParamSet<float> add_prefix(const ParamSet<float>& src, const std::string& prefix) {
  ParamSet<float> out;
  for (const auto& [name, t] : src) out.add(prefix + name, t);
  return out;
}

}  // namespace ispw::grad
