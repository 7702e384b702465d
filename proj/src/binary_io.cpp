#include "megclass/binary_io.hpp"

#include "megclass/error.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace megclass {

namespace {

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

}  // namespace

void Fnv1a::update(std::string_view bytes) {
  for (const char c : bytes) {
    state_ ^= static_cast<unsigned char>(c);
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::update_u64(std::uint64_t v) {
  std::string tmp;
  put_le(tmp, v);
  update(tmp);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::f32_span(std::span<const float> values) {
  for (const float v : values) f32(v);
}

void BinaryWriter::f64_span(std::span<const double> values) {
  for (const double v : values) f64(v);
}

void BinaryWriter::bytes(std::string_view raw) { buf_.append(raw); }

BinaryReader::BinaryReader(std::string data, std::string source)
    : data_(std::move(data)), source_(std::move(source)) {}

void BinaryReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw CacheError(source_ + ": truncated file");
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += 8;
  return v;
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += 4;
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  return bytes(n);
}

std::string BinaryReader::bytes(std::size_t n) {
  need(n);
  std::string out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void BinaryReader::f32_span(std::span<float> out) {
  need(out.size() * 4);
  for (float& v : out) v = f32();
}

void BinaryReader::f64_span(std::span<double> out) {
  need(out.size() * 8);
  for (double& v : out) v = f64();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace megclass
