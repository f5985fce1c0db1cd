#include "osciguard/core/binio.hpp"

#include <cstring>
#include <istream>
#include <ostream>

#include "osciguard/core/errors.hpp"

namespace osciguard {

namespace {
void put_le(std::ostream& os, std::uint64_t v, int nbytes) {
  char buf[8];
  for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, nbytes);
}

std::uint64_t get_le(std::istream& is, int nbytes) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), nbytes);
  if (!is) throw DataFormatError("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { put_le(os, v, 1); }
void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { put_le(os, v, 8); }

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_le(os, bits, 8);
}

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

void write_f64_array(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  for (double x : v) write_f64(os, x);
}

std::uint8_t read_u8(std::istream& is) { return static_cast<std::uint8_t>(get_le(is, 1)); }
std::uint32_t read_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
std::uint64_t read_u64(std::istream& is) { return get_le(is, 8); }

double read_f64(std::istream& is) {
  const std::uint64_t bits = get_le(is, 8);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw DataFormatError("unexpected end of file");
}

std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1u << 28)) throw DataFormatError("string length out of range");
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n);
  return s;
}

std::vector<double> read_f64_array(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ull << 32)) throw DataFormatError("array length out of range");
  std::vector<double> v(n);
  for (auto& x : v) x = read_f64(is);
  return v;
}

void expect_magic(std::istream& is, const char* magic, const char* what) {
  const std::size_t n = std::strlen(magic);
  char buf[16];
  is.read(buf, static_cast<std::streamsize>(n));
  if (!is || std::memcmp(buf, magic, n) != 0)
    throw DataFormatError(std::string("bad magic, not a ") + what + " file");
}

}  // namespace osciguard
