#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iterkit {

// shortest-exact formatting of a double ('.'-decimal, round-trippable)
std::string format_double(double v);

// UTF-8 CSV with a header row; every cell formatted via format_double
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_text(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// FNV-1a 64-bit hash of raw bytes, as hex (used for config manifests)
std::string fnv1a_hex(const std::string& bytes);

}  // namespace iterkit
