#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dismax/tensor.hpp"

namespace dismax {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
// Throws format_error on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Doubles serialized as base64 little-endian 64-bit payloads so tensors
// round-trip bit-exactly regardless of host.
std::string doubles_to_b64(const double* data, std::size_t count);
std::vector<double> doubles_from_b64(const std::string& text);

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

// FNV-1a 64 over a string; used for config hashes in manifests.
std::string fnv1a_hex(const std::string& text);

}  // namespace dismax
