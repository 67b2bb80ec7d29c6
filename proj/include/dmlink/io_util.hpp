// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace dmlink {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest round-trip decimal form (std::to_chars).
std::string fmt_double(double v);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

// CSV with a single leading comment line that pins the run:
// "# tool=dmlink version=... config=<hash> seed=<seed>".
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view config_digest,
            std::uint64_t seed);

  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  void row_numeric(const std::vector<double>& cells);

 private:
  std::ofstream out_;
};

void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dmlink
