#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace megclass {

// 64-bit FNV-1a, used for corpus fingerprints and config hashes.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update_u64(std::uint64_t v);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v);

// Little-endian writer into an in-memory buffer; flushed with write_file_atomic.
class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);
  void f32_span(std::span<const float> values);
  void f64_span(std::span<const double> values);
  void bytes(std::string_view raw);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked little-endian reader; every read past the end throws CacheError.
class BinaryReader {
 public:
  BinaryReader(std::string data, std::string source);

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void f32_span(std::span<float> out);
  void f64_span(std::span<double> out);
  std::string bytes(std::size_t n);

  bool at_end() const { return pos_ == data_.size(); }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const;

  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace megclass
