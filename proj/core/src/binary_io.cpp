#include "laggre/binary_io.hpp"

#include <string>

#include "laggre/error.hpp"

namespace laggre::io {

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }

void BinaryWriter::raw(const void* data, std::size_t size) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out_) throw IoError("write failed on '" + path_.string() + "'");
}

void BinaryWriter::finish() {
  out_.flush();
  if (!out_) throw IoError("flush failed on '" + path_.string() + "'");
  out_.close();
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw IoError("cannot open '" + path.string() + "': not a readable file");
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open '" + path.string() + "' for reading");
  size_ = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "'");
}

void BinaryReader::expect_magic(std::string_view tag) {
  require(tag.size(), "magic");
  std::string got(tag.size(), '\0');
  raw(got.data(), got.size());
  if (got != tag)
    throw FormatError("'" + path_.string() + "': bad magic, expected '" + std::string(tag) + "'");
}

std::uint64_t BinaryReader::remaining() {
  const auto pos = in_.tellg();
  if (pos < 0) return 0;
  const auto at = static_cast<std::uint64_t>(pos);
  return at > size_ ? 0 : size_ - at;
}

void BinaryReader::require(std::uint64_t bytes, std::string_view what) {
  if (remaining() < bytes)
    throw FormatError("'" + path_.string() + "': truncated while reading " + std::string(what));
}

void BinaryReader::expect_end() {
  if (remaining() != 0) throw FormatError("'" + path_.string() + "': trailing bytes after payload");
}

void BinaryReader::raw(void* data, std::size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in_.gcount()) != size)
    throw FormatError("'" + path_.string() + "': unexpected end of file");
}

}  // namespace laggre::io
