// SPDX-License-Identifier: Apache-2.0

#include "dmlink/io_util.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace dmlink {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw std::runtime_error("fmt_double failed");
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::string_view config_digest, std::uint64_t seed) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) {
    throw std::runtime_error("cannot open output file: " + path.string());
  }
  out_ << "# tool=dmlink version=" << kToolVersion
       << " config=" << config_digest << " seed=" << seed << "\n";
}

void CsvWriter::header(const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ",";
    out_ << columns[i];
  }
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) { header(cells); }

void CsvWriter::row_numeric(const std::vector<double>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ",";
    out_ << fmt_double(cells[i]);
  }
  out_ << "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path.string());
  }
  out << text;
}

}  // namespace dmlink
