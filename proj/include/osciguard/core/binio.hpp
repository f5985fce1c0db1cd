#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace osciguard {

// Little-endian fixed-width binary helpers shared by the dataset and
// checkpoint containers. Encoding is explicit so files do not depend on
// host byte order.

void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_bytes(std::ostream& os, const void* p, std::size_t n);
void write_string(std::ostream& os, const std::string& s);  // u32 length + bytes
void write_f64_array(std::ostream& os, const std::vector<double>& v);

std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
void read_bytes(std::istream& is, void* p, std::size_t n);
std::string read_string(std::istream& is);
std::vector<double> read_f64_array(std::istream& is);

/// Checks a fixed magic tag at the current stream position.
void expect_magic(std::istream& is, const char* magic, const char* what);

}  // namespace osciguard
