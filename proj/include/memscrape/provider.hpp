#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "memscrape/error.hpp"
#include "memscrape/target.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

/// What the attack pipeline needs from the system under attack. The
/// simulator backend serves CI; the live backend reads real procfs and a
/// physical-memory device.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string list_processes() = 0;
  virtual std::string read_maps(int pid) = 0;
  virtual Bytes read_pagemap(int pid, std::uint64_t vpn_start,
                             std::uint64_t count) = 0;
  virtual std::uint32_t read_word(std::uint64_t pa) = 0;
  virtual std::uint64_t page_size() = 0;
};

class SimProvider : public Provider {
 public:
  explicit SimProvider(Simulator& sim, bool pagemap_restricted = false)
      : sim_(sim), pagemap_restricted_(pagemap_restricted) {}

  std::string list_processes() override { return sim_.list_processes(); }
  std::string read_maps(int pid) override { return sim_.proc_maps(pid); }

  Bytes read_pagemap(int pid, std::uint64_t vpn_start,
                     std::uint64_t count) override {
    // Models a platform that restricts pagemap to the owning process; the
    // attacker never owns the victim, so every read is foreign.
    if (pagemap_restricted_) {
      raise(Errc::PermissionDenied,
            "pagemap of pid " + std::to_string(pid) + " is not readable");
    }
    return sim_.read_pagemap_range(pid, vpn_start, count);
  }

  std::uint32_t read_word(std::uint64_t pa) override {
    return sim_.mem().read_word(pa);
  }

  std::uint64_t page_size() override { return sim_.page_size(); }

 private:
  Simulator& sim_;
  bool pagemap_restricted_;
};

/// Reads a real system: /proc for listings/maps/pagemap and a physical
/// memory device for word reads. Requires explicit authorization to use;
/// never exercised in CI.
class LiveProvider : public Provider {
 public:
  explicit LiveProvider(std::string proc_root = "/proc",
                        std::string mem_path = "/dev/mem")
      : proc_root_(std::move(proc_root)), mem_path_(std::move(mem_path)) {}

  std::string list_processes() override {
    std::string out;
    for (const auto& entry : std::filesystem::directory_iterator(proc_root_)) {
      const std::string name = entry.path().filename().string();
      if (name.find_first_not_of("0123456789") != std::string::npos) continue;
      std::string cmdline = read_file(entry.path() / "cmdline");
      if (cmdline.empty()) continue;
      for (auto& c : cmdline) {
        if (c == '\0') c = ' ';
      }
      while (!cmdline.empty() && cmdline.back() == ' ') cmdline.pop_back();
      std::string ppid = stat_field(entry.path() / "stat", 4);
      out += name + " " + (ppid.empty() ? "0" : ppid) + " 00:00 " + cmdline + "\n";
    }
    return out;
  }

  std::string read_maps(int pid) override {
    std::string text =
        read_file(std::filesystem::path(proc_root_) / std::to_string(pid) / "maps");
    if (text.empty()) {
      raise(Errc::NoSuchPid, "cannot read maps of pid " + std::to_string(pid));
    }
    return text;
  }

  Bytes read_pagemap(int pid, std::uint64_t vpn_start,
                     std::uint64_t count) override {
    const std::string path =
        (std::filesystem::path(proc_root_) / std::to_string(pid) / "pagemap").string();
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) raise(Errc::PermissionDenied, "open " + path);
    const std::uint64_t ps = page_size();
    Bytes out(count * 8, 0);
    ssize_t n = ::pread(fd, out.data(), out.size(),
                        static_cast<off_t>(pagemap_file_offset(vpn_start * ps, ps)));
    ::close(fd);
    if (n < 0) raise(Errc::IoError, "pread " + path);
    out.resize(static_cast<std::size_t>(n));
    return out;
  }

  std::uint32_t read_word(std::uint64_t pa) override {
    if (mem_fd_ < 0) {
      mem_fd_ = ::open(mem_path_.c_str(), O_RDONLY);
      if (mem_fd_ < 0) raise(Errc::PermissionDenied, "open " + mem_path_);
    }
    std::uint8_t buf[4];
    ssize_t n = ::pread(mem_fd_, buf, 4, static_cast<off_t>(pa));
    if (n != 4) raise(Errc::OutOfRange, "pread word at 0x" + to_hex(pa));
    return static_cast<std::uint32_t>(buf[0]) |
           static_cast<std::uint32_t>(buf[1]) << 8 |
           static_cast<std::uint32_t>(buf[2]) << 16 |
           static_cast<std::uint32_t>(buf[3]) << 24;
  }

  std::uint64_t page_size() override {
    long ps = ::sysconf(_SC_PAGESIZE);
    return ps > 0 ? static_cast<std::uint64_t>(ps) : 4096;
  }

  ~LiveProvider() override {
    if (mem_fd_ >= 0) ::close(mem_fd_);
  }

 private:
  static std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // 1-based field of /proc/<pid>/stat, counting from "pid (comm) state ...".
  static std::string stat_field(const std::filesystem::path& p, int index) {
    std::string text = read_file(p);
    std::size_t close = text.rfind(')');
    if (close == std::string::npos) return {};
    std::istringstream rest(text.substr(close + 1));
    std::string tok;
    for (int i = 3; i <= index; ++i) {
      if (!(rest >> tok)) return {};
    }
    return tok;
  }

  std::string proc_root_;
  std::string mem_path_;
  int mem_fd_ = -1;
};

}  // namespace memscrape
