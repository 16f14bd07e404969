#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hipt/nn/network.hpp"

namespace hipt::nn {

// Binary model file:
//   "HIPTMODL" | u32 version | u32 descriptor length | descriptor (JSON text)
//   | u64 parameter count | f64 parameters | u64 FNV-1a of everything before it
// All integers and floats little-endian.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const ParamStore& params);
ParamStore decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::string& path, const ParamStore& params);
ParamStore load_model(const std::string& path);

std::string params_digest(const ParamStore& params);

}  // namespace hipt::nn
