#pragma once

// Little-endian readers and writers shared by the embedding and checkpoint
// containers. Reads report the byte offset on truncation.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "tvs/error.h"

namespace tvs::bin {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits = std::bit_cast<U>(value);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  out.write(buf, sizeof(T));
}

inline void write_bytes(std::ostream& out, const std::string& bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T read_le(const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    unsigned char buf[sizeof(T)];
    read_raw(reinterpret_cast<char*>(buf), sizeof(T), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
    return std::bit_cast<T>(bits);
  }

  std::string read_string(std::size_t n, const char* what) {
    std::string s(n, '\0');
    if (n > 0) read_raw(s.data(), n, what);
    return s;
  }

  std::uint64_t offset() const { return offset_; }

  bool at_eof() {
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  void read_raw(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw FormatError("truncated file: expected " + std::to_string(n) + " bytes of " + what +
                        " at byte offset " + std::to_string(offset_ + got));
    }
    offset_ += n;
  }

  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace tvs::bin
