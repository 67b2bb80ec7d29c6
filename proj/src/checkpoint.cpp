// SPDX-License-Identifier: Apache-2.0

#include "dmlink/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dmlink/io_util.hpp"

namespace dmlink {
namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::size_t shape_elements(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

// Doubles are serialized as little-endian byte streams regardless of host
// order, so checkpoints are portable.
std::vector<unsigned char> doubles_to_le_bytes(const std::vector<double>& v) {
  std::vector<unsigned char> bytes(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[i], 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(bytes.data() + 8 * i, &bits, 8);
  }
  return bytes;
}

std::vector<double> le_bytes_to_doubles(const std::vector<unsigned char>& b) {
  if (b.size() % 8 != 0) {
    throw std::runtime_error("checkpoint array byte count is not a multiple of 8");
  }
  std::vector<double> v(b.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, b.data() + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}

}  // namespace

std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const std::size_t rem = len - i;
  if (rem == 1) {
    const unsigned v = data[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rem == 2) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) {
    throw std::runtime_error("base64 payload length is not a multiple of 4");
  }
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) {
          throw std::runtime_error("base64 padding in unexpected position");
        }
        vals[j] = 0;
        ++pad;
      } else {
        vals[j] = decode_char(c);
        if (vals[j] < 0) throw std::runtime_error("invalid base64 character");
        if (pad > 0) throw std::runtime_error("base64 data after padding");
      }
    }
    const unsigned v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back((v >> 16) & 0xff);
    if (pad < 2) out.push_back((v >> 8) & 0xff);
    if (pad < 1) out.push_back(v & 0xff);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json doc;
  doc["format"] = "dmlink-checkpoint";
  doc["version"] = 1;
  doc["kind"] = ckpt.kind;
  doc["meta"] = ckpt.meta;
  auto& arrays = doc["arrays"] = nlohmann::ordered_json::array();
  for (const NamedArray& a : ckpt.arrays) {
    if (a.data.size() != shape_elements(a.shape)) {
      throw std::runtime_error("checkpoint array '" + a.name +
                               "' shape does not match data size");
    }
    nlohmann::ordered_json ja;
    ja["name"] = a.name;
    ja["shape"] = a.shape;
    ja["dtype"] = "f64le";
    const auto bytes = doubles_to_le_bytes(a.data);
    ja["data"] = base64_encode(bytes.data(), bytes.size());
    arrays.push_back(std::move(ja));
  }
  write_text_file(path, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  nlohmann::ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "dmlink-checkpoint") {
    throw std::runtime_error("file " + path.string() +
                             " is not a dmlink checkpoint");
  }
  const int version = doc.value("version", 0);
  if (version != 1) {
    throw std::runtime_error("checkpoint " + path.string() +
                             " has unsupported version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = doc.at("kind").get<std::string>();
  ckpt.meta = doc.value("meta", nlohmann::ordered_json::object());
  for (const auto& ja : doc.at("arrays")) {
    NamedArray a;
    a.name = ja.at("name").get<std::string>();
    a.shape = ja.at("shape").get<std::vector<std::size_t>>();
    if (ja.value("dtype", "") != "f64le") {
      throw std::runtime_error("checkpoint array '" + a.name +
                               "' has unsupported dtype");
    }
    a.data = le_bytes_to_doubles(base64_decode(ja.at("data").get<std::string>()));
    if (a.data.size() != shape_elements(a.shape)) {
      throw std::runtime_error("checkpoint array '" + a.name +
                               "' data does not match its shape");
    }
    ckpt.arrays.push_back(std::move(a));
  }
  return ckpt;
}

const NamedArray& find_array(const Checkpoint& ckpt, const std::string& name) {
  for (const NamedArray& a : ckpt.arrays) {
    if (a.name == name) return a;
  }
  throw std::runtime_error("checkpoint is missing array '" + name + "'");
}

}  // namespace dmlink
