// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dmlink {

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

// On-disk model format: a JSON document with a `kind` tag, free-form
// `meta`, and named arrays whose float64 little-endian bytes are base64
// encoded. Round-trips are bit-exact.
struct Checkpoint {
  std::string kind;
  nlohmann::ordered_json meta;
  std::vector<NamedArray> arrays;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

const NamedArray& find_array(const Checkpoint& ckpt, const std::string& name);

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace dmlink
