#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

namespace ifgnet::detail {

// Little-endian byte sink.
class ByteWriter {
 public:
  void raw(const char* bytes, std::size_t n) { buf_.insert(buf_.end(), bytes, bytes + n); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }

  const std::vector<char>& bytes() const { return buf_; }
  // Returns false if the file could not be written.
  bool save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    return static_cast<bool>(out);
  }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

// Little-endian byte source; calls on_truncated (which must throw) when a
// read runs past the end.
class ByteReader {
 public:
  ByteReader(std::vector<char> buf, std::function<void()> on_truncated)
      : buf_(std::move(buf)), on_truncated_(std::move(on_truncated)) {}

  static bool slurp(const std::filesystem::path& path, std::vector<char>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return true;
  }

  void need(std::size_t n) const {
    if (n > buf_.size() - pos_) on_truncated_();
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::vector<char> buf_;
  std::function<void()> on_truncated_;
  std::size_t pos_ = 0;
};

}  // namespace ifgnet::detail
