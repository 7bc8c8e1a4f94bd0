#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace hyperppo {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written little-endian by byte copy");

// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  void put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    put_bytes(s);
  }
  void put_f32(std::span<const double> values) {
    for (double v : values) put(static_cast<float>(v));
  }
  void put_f64(std::span<const double> values) {
    for (double v : values) put(v);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

// Bounds-checked reader; every overrun throws E with `what` naming the file kind.
template <typename E>
class ByteReader {
 public:
  ByteReader(std::span<const char> data, std::string what) : data_(data), what_(std::move(what)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), take(sizeof(T)), sizeof(T));
    return std::bit_cast<T>(bytes);
  }
  std::string get_bytes(std::size_t n) { return std::string(take(n), n); }
  std::string get_string(std::size_t max_len = 1u << 26) {
    const auto n = get<std::uint64_t>();
    if (n > max_len) fail("string length out of range");
    return get_bytes(n);
  }
  std::vector<double> get_f32(std::size_t n) {
    check(n, sizeof(float));
    std::vector<double> out(n);
    for (double& v : out) v = get<float>();
    return out;
  }
  std::vector<double> get_f64(std::size_t n) {
    check(n, sizeof(double));
    std::vector<double> out(n);
    for (double& v : out) v = get<double>();
    return out;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const { throw E(what_ + ": " + msg); }

 private:
  void check(std::size_t n, std::size_t width) {
    if (width != 0 && n > remaining() / width) fail("truncated file");
  }
  const char* take(std::size_t n) {
    if (n > remaining()) fail("truncated file");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::span<const char> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<char>& bytes);

}  // namespace hyperppo
