#pragma once

// Parameter checkpoints: "ISPW", u32 version (1), u32 entry count, then per
// entry u16 name length, UTF-8 name, u8 rank, u32 dims, f32 data. All LE.

#include <cstdint>
#include <string>
#include <vector>

#include "ispw/grad/params.hpp"

namespace ispw::grad {

std::vector<std::uint8_t> encode_checkpoint(const ParamSet<float>& params);
ParamSet<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ParamSet<float>& params);
ParamSet<float> load_checkpoint(const std::string& path);

/// Copy values from `src` into `dst` for every name in `dst`; shapes must match.
void assign_params(ParamSet<float>& dst, const ParamSet<float>& src, const std::string& prefix = "");

/// Entries of `src` whose names start with `prefix`, with the prefix removed.
ParamSet<float> strip_prefix(const ParamSet<float>& src, const std::string& prefix);
/// All entries of `src` renamed to prefix + name.
ParamSet<float> add_prefix(const ParamSet<float>& src, const std::string& prefix);

}  // namespace ispw::grad
