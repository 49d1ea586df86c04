#pragma once

#include <bit>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <string>
#include <string_view>

#include "prga/error.hpp"

namespace prga::bytes {

// Little-endian append-only writer.
class Writer {
 public:
  void magic(std::string_view tag) { out_.append(tag); }

  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void text(std::string_view s) { out_.append(s); }

  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string out_;
};

// Little-endian cursor. Every failure reports the byte offset it stopped at.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_magic(std::string_view tag) {
    if (remaining() < tag.size()) {
      throw Error(ErrorKind::TruncatedFile, "file shorter than magic at byte offset 0");
    }
    if (data_.substr(pos_, tag.size()) != tag) {
      throw Error(ErrorKind::BadMagic, "expected " + std::string(tag) + " at byte offset " +
                                           std::to_string(pos_));
    }
    pos_ += tag.size();
  }

  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }

  float f32() {
    const std::size_t at = pos_;
    const float v = std::bit_cast<float>(static_cast<std::uint32_t>(get(4)));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteValue, "non-finite f32 at byte offset " + std::to_string(at));
    }
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorKind::TruncatedFile, "need " + std::to_string(n) + " bytes at byte offset " +
                                                std::to_string(pos_) + ", have " +
                                                std::to_string(remaining()));
    }
  }

 private:
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace prga::bytes
