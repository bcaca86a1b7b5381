#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>

#include "memscrape/error.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

struct FrameId {
  std::uint64_t index = 0;

  friend bool operator==(FrameId a, FrameId b) { return a.index == b.index; }
  friend auto operator<=>(FrameId a, FrameId b) { return a.index <=> b.index; }
};

/// Accelerator-local DRAM as a flat array of fixed-size page frames.
/// Word access mirrors devmem semantics: 4-byte aligned, little-endian.
/// Fresh memory is zero-filled; the point of interest is what happens
/// (or fails to happen) on free, not cold-boot content.
class PhysicalMemory {
 public:
  explicit PhysicalMemory(std::uint64_t frame_size = 4096,
                          std::uint64_t frame_count = 4096)
      : frame_size_(frame_size), frame_count_(frame_count) {
    if (!is_power_of_two(frame_size) || frame_size < 512) {
      raise(Errc::InvalidArgument,
            "frame_size must be a power of two >= 512, got " +
                std::to_string(frame_size));
    }
    store_.assign(frame_size_ * frame_count_, 0);
  }

  std::uint64_t frame_size() const { return frame_size_; }
  std::uint64_t frame_count() const { return frame_count_; }
  std::uint64_t total_size() const { return store_.size(); }

  std::uint32_t read_word(std::uint64_t pa) const {
    if (pa % 4 != 0) {
      raise(Errc::Unaligned, "read_word at 0x" + to_hex(pa));
    }
    check_span(pa, 4, "read_word");
    return static_cast<std::uint32_t>(store_[pa]) |
           static_cast<std::uint32_t>(store_[pa + 1]) << 8 |
           static_cast<std::uint32_t>(store_[pa + 2]) << 16 |
           static_cast<std::uint32_t>(store_[pa + 3]) << 24;
  }

  void write_bytes(std::uint64_t pa, std::span<const std::uint8_t> data) {
    check_span(pa, data.size(), "write_bytes");
    if (!data.empty()) {
      std::memcpy(store_.data() + pa, data.data(), data.size());
    }
  }

  Bytes read_range(std::uint64_t pa, std::uint64_t len) const {
    check_span(pa, len, "read_range");
    return Bytes(store_.begin() + static_cast<std::ptrdiff_t>(pa),
                 store_.begin() + static_cast<std::ptrdiff_t>(pa + len));
  }

  void scrub_frame(FrameId frame, std::uint8_t fill) {
    if (frame.index >= frame_count_) {
      raise(Errc::OutOfRange, "scrub_frame " + std::to_string(frame.index) +
                                  " of " + std::to_string(frame_count_));
    }
    std::memset(store_.data() + frame.index * frame_size_, fill, frame_size_);
  }

  std::uint64_t frame_base(FrameId frame) const { return frame.index * frame_size_; }

  const Bytes& store() const { return store_; }

 private:
  void check_span(std::uint64_t pa, std::uint64_t len, const char* op) const {
    if (pa > store_.size() || len > store_.size() - pa) {
      raise(Errc::OutOfRange, std::string(op) + " [0x" + to_hex(pa) + ", +" +
                                  std::to_string(len) + ") beyond 0x" +
                                  to_hex(store_.size()));
    }
  }

  std::uint64_t frame_size_;
  std::uint64_t frame_count_;
  Bytes store_;
};

}  // namespace memscrape
