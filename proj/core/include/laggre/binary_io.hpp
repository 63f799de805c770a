#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string_view>
#include <type_traits>

namespace laggre::io {

// Little-endian writer over a file. Every call checks the stream; failures
// surface as IoError.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void magic(std::string_view tag);

  template <typename T>
  void scalar(T value) {
    static_assert(std::is_arithmetic_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    raw(bytes.data(), sizeof(T));
  }

  template <typename T>
  void array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(values.data(), values.size_bytes());
    } else {
      for (T v : values) scalar(v);
    }
  }

  void finish();

 private:
  void raw(const void* data, std::size_t size);

  std::filesystem::path path_;
  std::ofstream out_;
};

// Little-endian reader. Truncation and bad magic raise FormatError; failure to
// open raises IoError.
class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);

  template <typename T>
  T scalar() {
    static_assert(std::is_arithmetic_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    raw(bytes.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  template <typename T>
  void array(std::span<T> out) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(out.data(), out.size_bytes());
    } else {
      for (T& v : out) v = scalar<T>();
    }
  }

  /// Bytes left between the cursor and end of file.
  std::uint64_t remaining();
  /// Throws FormatError if fewer than `bytes` remain.
  void require(std::uint64_t bytes, std::string_view what);
  /// Throws FormatError on trailing garbage.
  void expect_end();

 private:
  void raw(void* data, std::size_t size);

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
};

}  // namespace laggre::io
