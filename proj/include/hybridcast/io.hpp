#pragma once

#include <filesystem>
#include <string>

namespace hybridcast::io {

// Shortest-safe round-trip text for a double ("%.17g"); "nan"/"inf" as-is.
std::string format_double(double v);

// Fixed-point text for tables.
std::string format_fixed(double v, int decimals);

// Writes via a sibling temp file and rename, so readers never see a partial
// file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Throws DataError naming the path when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

}  // namespace hybridcast::io
