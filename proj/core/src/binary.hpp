#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "conceptforge/error.hpp"

namespace conceptforge::detail {

inline void put_u32(std::string& out, uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.append(bytes, 4);
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

inline void put_f32s(std::string& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto offset = out.size();
    out.resize(offset + values.size() * 4);
    std::memcpy(out.data() + offset, values.data(), values.size() * 4);
  } else {
    for (float f : values) put_f32(out, f);
  }
}

/// Bounds-checked little-endian cursor over a byte buffer.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::string_view take(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  uint32_t u32(const char* what) {
    auto b = take(4, what);
    return static_cast<uint32_t>(static_cast<uint8_t>(b[0])) |
           static_cast<uint32_t>(static_cast<uint8_t>(b[1])) << 8 |
           static_cast<uint32_t>(static_cast<uint8_t>(b[2])) << 16 |
           static_cast<uint32_t>(static_cast<uint8_t>(b[3])) << 24;
  }

  /// Reads `out.size()` floats, rejecting NaN and infinities.
  void finite_f32s(std::span<float> out, const char* what) {
    const std::size_t start = pos_;
    auto b = take(out.size() * 4, what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), b.data(), b.size());
    } else {
      Reader inner(b);
      for (auto& f : out) f = std::bit_cast<float>(inner.u32(what));
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) throw FormatError("non-finite float", start + i * 4);
    }
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace conceptforge::detail
