#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memscrape/error.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

// Mainline Linux pagemap bit layout, one 64-bit entry per virtual page:
//   bits 0-54   page frame number (when present)
//   bit  55     soft-dirty
//   bit  56     exclusively mapped
//   bit  61     file-page or shared-anon
//   bit  62     swapped
//   bit  63     present
struct PagemapEntry {
  std::uint64_t pfn = 0;
  bool soft_dirty = false;
  bool exclusive = false;
  bool file_or_shared_anon = false;
  bool swapped = false;
  bool present = false;

  friend bool operator==(const PagemapEntry&, const PagemapEntry&) = default;
};

inline constexpr std::uint64_t kPfnMask = (std::uint64_t{1} << 55) - 1;

inline PagemapEntry decode_entry(std::uint64_t raw) {
  PagemapEntry e;
  e.present = (raw >> 63) & 1;
  e.swapped = (raw >> 62) & 1;
  e.file_or_shared_anon = (raw >> 61) & 1;
  e.exclusive = (raw >> 56) & 1;
  e.soft_dirty = (raw >> 55) & 1;
  // The pfn field is only meaningful for present pages; swap entries reuse
  // those bits for swap type/offset, which we do not model.
  e.pfn = e.present ? (raw & kPfnMask) : 0;
  return e;
}

inline std::uint64_t encode_entry(const PagemapEntry& e) {
  if (e.pfn > kPfnMask) {
    raise(Errc::PfnOverflow, "pfn 0x" + to_hex(e.pfn) + " exceeds 55 bits");
  }
  if (e.present && e.swapped) {
    raise(Errc::InvalidArgument, "entry cannot be both present and swapped");
  }
  std::uint64_t raw = e.present ? e.pfn : 0;
  raw |= std::uint64_t{e.soft_dirty} << 55;
  raw |= std::uint64_t{e.exclusive} << 56;
  raw |= std::uint64_t{e.file_or_shared_anon} << 61;
  raw |= std::uint64_t{e.swapped} << 62;
  raw |= std::uint64_t{e.present} << 63;
  return raw;
}

/// One parsed line of a /proc/<pid>/maps file.
struct MapsRecord {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::string perms;        // e.g. "rw-p"
  std::uint64_t file_offset = 0;
  std::string dev;          // canonical "MM:mm", zero-padded hex
  std::uint64_t inode = 0;
  std::string pathname;     // empty, "[heap]", or a path

  friend bool operator==(const MapsRecord&, const MapsRecord&) = default;
};

namespace detail {

class LineScanner {
 public:
  explicit LineScanner(std::string_view line) : line_(line) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= line_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    raise(Errc::MalformedLine, why + " at byte " + std::to_string(pos_), pos_);
  }

  std::uint64_t hex(const char* field) {
    std::size_t start = pos_;
    std::uint64_t v = 0;
    while (!done() && std::isxdigit(static_cast<unsigned char>(line_[pos_]))) {
      char c = line_[pos_];
      int d = c <= '9' ? c - '0' : (std::tolower(c) - 'a' + 10);
      v = (v << 4) | static_cast<std::uint64_t>(d);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected hex ") + field);
    return v;
  }

  std::uint64_t dec(const char* field) {
    std::size_t start = pos_;
    std::uint64_t v = 0;
    while (!done() && std::isdigit(static_cast<unsigned char>(line_[pos_]))) {
      v = v * 10 + static_cast<std::uint64_t>(line_[pos_] - '0');
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected integer ") + field);
    return v;
  }

  void expect(char c) {
    if (done() || line_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  char peek() const { return done() ? '\0' : line_[pos_]; }
  void advance() { ++pos_; }

  void spaces() {
    std::size_t start = pos_;
    while (!done() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
    if (pos_ == start) fail("expected whitespace");
  }

  std::string rest_trimmed() {
    while (!done() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
    std::string out(line_.substr(pos_));
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r' ||
                            out.back() == ' ' || out.back() == '\t')) {
      out.pop_back();
    }
    pos_ = line_.size();
    return out;
  }

 private:
  std::string_view line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses one maps line: `%lx-%lx %4s %lx %x:%x %lu [pathname]`.
/// Fails loudly with the byte position of the first violation; a forensic
/// tool must not silently drop mappings.
inline MapsRecord parse_maps_line(std::string_view line,
                                  std::uint64_t page_size = 4096) {
  detail::LineScanner s(line);
  MapsRecord r;

  std::size_t start_pos = s.pos();
  r.start = s.hex("start address");
  if (r.start % page_size != 0) {
    raise(Errc::MalformedLine, "start not page-aligned at byte " +
                                   std::to_string(start_pos), start_pos);
  }
  s.expect('-');
  std::size_t end_pos = s.pos();
  r.end = s.hex("end address");
  if (r.end % page_size != 0) {
    raise(Errc::MalformedLine, "end not page-aligned at byte " +
                                   std::to_string(end_pos), end_pos);
  }
  if (r.start >= r.end) {
    raise(Errc::MalformedLine, "start >= end at byte " +
                                   std::to_string(end_pos), end_pos);
  }
  s.spaces();

  static constexpr const char* kPermsAlphabet[4] = {"r-", "w-", "x-", "ps"};
  for (const char* allowed : kPermsAlphabet) {
    char c = s.peek();
    if (c != allowed[0] && c != allowed[1]) s.fail("bad perms character");
    r.perms.push_back(c);
    s.advance();
  }
  s.spaces();

  r.file_offset = s.hex("file offset");
  s.spaces();

  std::uint64_t dev_major = s.hex("device major");
  s.expect(':');
  std::uint64_t dev_minor = s.hex("device minor");
  char dev_buf[32];
  std::snprintf(dev_buf, sizeof dev_buf, "%02llx:%02llx",
                static_cast<unsigned long long>(dev_major),
                static_cast<unsigned long long>(dev_minor));
  r.dev = dev_buf;
  s.spaces();

  r.inode = s.dec("inode");
  r.pathname = s.rest_trimmed();
  return r;
}

/// Canonical re-rendering: same fields, whitespace normalized to single
/// spaces, offset zero-padded to 8 digits as the kernel prints it.
inline std::string render_maps_line(const MapsRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%llx-%llx %s %08llx %s %llu",
                static_cast<unsigned long long>(r.start),
                static_cast<unsigned long long>(r.end), r.perms.c_str(),
                static_cast<unsigned long long>(r.file_offset), r.dev.c_str(),
                static_cast<unsigned long long>(r.inode));
  std::string out(buf);
  if (!r.pathname.empty()) {
    out += ' ';
    out += r.pathname;
  }
  return out;
}

inline std::vector<MapsRecord> parse_maps(std::string_view text,
                                          std::uint64_t page_size = 4096) {
  std::vector<MapsRecord> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                       : eol - pos);
    if (!line.empty()) records.push_back(parse_maps_line(line, page_size));
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return records;
}

/// (start, end) of the unique "[heap]" record.
inline std::pair<std::uint64_t, std::uint64_t> heap_range(
    const std::vector<MapsRecord>& records) {
  const MapsRecord* heap = nullptr;
  for (const auto& r : records) {
    if (r.pathname == "[heap]") {
      if (heap) raise(Errc::AmbiguousHeap, "multiple [heap] records");
      heap = &r;
    }
  }
  if (!heap) raise(Errc::NoHeap, "no [heap] record");
  return {heap->start, heap->end};
}

struct PageTableView {
  std::uint64_t page_size = 4096;
  std::map<std::uint64_t, PagemapEntry> entries;  // vpn -> entry
};

inline std::uint64_t translate(std::uint64_t va, const PageTableView& view) {
  std::uint64_t vpn = va / view.page_size;
  std::uint64_t off = va % view.page_size;
  auto it = view.entries.find(vpn);
  if (it == view.entries.end()) {
    raise(Errc::NotPresent, "vpn 0x" + to_hex(vpn) + " unmapped");
  }
  const PagemapEntry& e = it->second;
  // Swapped is a distinct signal: a live attacker retries on it.
  if (e.swapped) raise(Errc::Swapped, "vpn 0x" + to_hex(vpn) + " swapped out");
  if (!e.present) raise(Errc::NotPresent, "vpn 0x" + to_hex(vpn) + " not present");
  return e.pfn * view.page_size + off;
}

/// Byte offset of the entry for `va` within a pagemap file (8 bytes/page).
inline std::uint64_t pagemap_file_offset(std::uint64_t va,
                                         std::uint64_t page_size) {
  return (va / page_size) * 8;
}

/// procfs-parity serialization: count entries from vpn_start, 8 bytes each,
/// little-endian; unmapped vpns emit as zero.
inline Bytes serialize_pagemap(const PageTableView& view,
                               std::uint64_t vpn_start, std::uint64_t count) {
  Bytes out;
  out.reserve(count * 8);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto it = view.entries.find(vpn_start + i);
    std::uint64_t raw = it == view.entries.end() ? 0 : encode_entry(it->second);
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<std::uint8_t>(raw >> (8 * b)));
    }
  }
  return out;
}

}  // namespace memscrape
