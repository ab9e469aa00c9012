#pragma once

// Byte-level helpers shared by the wire formats: little-endian scalar IO,
// LSB-first bit packing, IEEE half conversion (round-nearest-even), and the
// raw "OCTM" f32 matrix container.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace octoquant {

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
  put_bytes(out, &v, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  template <typename T>
  T get_le() {
    if (pos_ + sizeof(T) > n_) throw FormatError("truncated stream");
    T v;
    std::memcpy(&v, p_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > n_) throw FormatError("truncated stream");
    const std::uint8_t* r = p_ + pos_;
    pos_ += n;
    return r;
  }

  std::size_t remaining() const { return n_ - pos_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Appends fixed-width fields LSB-first within each byte.
class BitWriter {
 public:
  void put(std::uint32_t value, unsigned bits) {
    for (unsigned i = 0; i < bits; ++i) {
      if (used_ == 0) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << used_);
      used_ = (used_ + 1) & 7;
    }
  }

  // Pads the current byte with zero bits.
  const std::vector<std::uint8_t>& finish() {
    used_ = 0;
    return bytes_;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  unsigned used_ = 0;
};

class BitReader {
 public:
  BitReader(const std::uint8_t* p, std::size_t nbytes) : p_(p), nbits_(nbytes * 8) {}

  std::uint32_t get(unsigned bits) {
    std::uint32_t v = 0;
    for (unsigned i = 0; i < bits; ++i) {
      if (pos_ >= nbits_) throw FormatError("bitstream overrun");
      if ((p_[pos_ >> 3] >> (pos_ & 7)) & 1u) v |= (1u << i);
      ++pos_;
    }
    return v;
  }

  // Remaining padding bits must be zero for a well-formed stream.
  bool padding_clear() const {
    for (std::size_t i = pos_; i < nbits_; ++i)
      if ((p_[i >> 3] >> (i & 7)) & 1u) return false;
    return true;
  }

 private:
  const std::uint8_t* p_;
  std::size_t nbits_;
  std::size_t pos_ = 0;
};

// IEEE binary16 conversion, round-nearest-even on the way down.
inline std::uint16_t f32_to_f16(float f) {
  std::uint32_t x;
  std::memcpy(&x, &f, 4);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t exp = (x >> 23) & 0xffu;
  std::uint32_t man = x & 0x7fffffu;
  if (exp == 0xff) return static_cast<std::uint16_t>(sign | 0x7c00u | (man ? 0x200u : 0));
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);  // overflow -> inf
  if (e <= 0) {
    if (e < -10) return static_cast<std::uint16_t>(sign);  // underflow -> zero
    man |= 0x800000u;
    const unsigned shift = static_cast<unsigned>(14 - e);
    std::uint32_t half = man >> shift;
    const std::uint32_t rem = man & ((1u << shift) - 1u);
    const std::uint32_t mid = 1u << (shift - 1);
    if (rem > mid || (rem == mid && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (man >> 13);
  const std::uint32_t rem = man & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // may carry into exponent; still correct
  return static_cast<std::uint16_t>(sign | half);
}

inline float f16_to_f32(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  const std::uint32_t man = h & 0x3ffu;
  std::uint32_t x;
  if (exp == 0) {
    if (man == 0) {
      x = sign;
    } else {
      // subnormal: renormalize
      int e = -1;
      std::uint32_t m = man;
      while (!(m & 0x400u)) {
        m <<= 1;
        ++e;
      }
      x = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((m & 0x3ffu) << 13);
    }
  } else if (exp == 31) {
    x = sign | 0x7f800000u | (man << 13);
  } else {
    x = sign | ((exp - 15 + 127) << 23) | (man << 13);
  }
  float f;
  std::memcpy(&f, &x, 4);
  return f;
}

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// "OCTM": magic, u32 rows, u32 cols, row-major f32.
inline std::vector<std::uint8_t> matrix_to_bytes(const Matrix& m) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "OCTM", 4);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) detail::put_le<float>(out, static_cast<float>(v));
  return out;
}

inline Matrix matrix_from_bytes(const std::uint8_t* p, std::size_t n) {
  detail::ByteReader rd(p, n);
  const std::uint8_t* magic = rd.take(4);
  if (std::memcmp(magic, "OCTM", 4) != 0) throw FormatError("bad matrix magic");
  const auto rows = rd.get_le<std::uint32_t>();
  const auto cols = rd.get_le<std::uint32_t>();
  if (rd.remaining() != static_cast<std::size_t>(rows) * cols * 4)
    throw FormatError("matrix payload size mismatch");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = rd.get_le<float>();
  return m;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace octoquant
