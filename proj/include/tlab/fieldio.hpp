#pragma once
// Field serialization: CSV (r, Re u, Im u) and a versioned binary format.

#include <cstdint>
#include <string>
#include <vector>

#include "tlab/grid.hpp"

namespace tl {

inline constexpr std::uint32_t kFieldFormatVersion = 1;

void write_field_csv(const RadialField& u, const std::string& path);
RadialField read_field_csv(GridPtr grid, const std::string& path);

// Binary layout: "TLFD", u32 version, i32 N, i32 M, f64 Rmax, then 2M f64.
void write_field_binary(const RadialField& u, const std::string& path);
RadialField read_field_binary(const std::string& path);

// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Formats a double with 17 significant digits.
std::string fmt17(double x);

// Hex string of the IEEE bit pattern, used in cache keys.
std::string double_bits_hex(double x);

}  // namespace tl
