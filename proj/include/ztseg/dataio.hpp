#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ztseg/types.hpp"

namespace ztseg {

// Row-major little-endian float64 matrix file: magic "ZTSEGMAT", u64 rows,
// u64 cols, then rows*cols doubles.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

// FNV-1a 64-bit, used for artifact change detection (not cryptographic).
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

// Shortest round-trip decimal rendering of a double (std::to_chars), so
// emitted CSV/JSON artifacts are byte-stable for equal values.
std::string format_double(double v);

// Minimal CSV support: header + rows, RFC-style quoting for fields that
// contain commas, quotes or newlines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);

}  // namespace ztseg
