#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "memscrape/error.hpp"
#include "memscrape/pagemap.hpp"
#include "memscrape/physmem.hpp"
#include "memscrape/policy.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

struct WorkloadSpec {
  std::string model_name;            // [A-Za-z0-9_]+
  Bytes image;                       // pixel buffer, width*height*3 bytes
  std::uint64_t extra_blob_len = 65536;
  std::uint64_t seed = 0;            // content seed, used by scenario tooling
};

/// Byte offsets of the interesting regions within the heap. Offsets are
/// a pure function of (model, image_len, extra_blob_len, allocator seed),
/// never of spawn order or image content, so offline profiles transfer
/// between simulator instances.
struct HeapLayout {
  std::uint64_t strings_offset = 0;
  std::uint64_t image_offset = 0;
  std::uint64_t image_len = 0;
};

enum class ProcState { Running, Terminated };

struct Process {
  int pid = 0;
  int ppid = 0;
  std::string cmdline;
  ProcState state = ProcState::Running;
  std::uint64_t heap_va_start = 0;
  std::uint64_t heap_va_end = 0;
  PageTableView page_table;
  std::vector<FrameId> owned_frames;  // heap page order
  WorkloadSpec workload;
  HeapLayout layout;

  // Ground truth kept for the evaluation harness: the heap bytes staged at
  // spawn (the workload never mutates them) and the frames held at exit.
  Bytes heap_image;
  std::vector<FrameId> frames_at_exit;

  std::uint64_t heap_len() const { return heap_va_end - heap_va_start; }
};

struct SimConfig {
  std::uint64_t frame_size = 4096;
  std::uint64_t frame_count = 4096;  // 16 MiB
  PolicyKind policy = PolicyKind::None;
  std::uint64_t seed = 0;            // allocator/layout seed
  int pid_base = 1391;
  int ppid = 2430;
  std::uint64_t heap_va_base = 0xaaaaee775000ULL;
};

/// Deterministic victim environment: process lifecycle, frame allocation,
/// procfs-style views. Single logical owner; all mutation goes through
/// spawn/terminate.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg = {})
      : cfg_(cfg),
        mem_(cfg.frame_size, cfg.frame_count),
        next_pid_(cfg.pid_base),
        place_rng_(cfg.seed) {
    if (cfg_.heap_va_base % cfg_.frame_size != 0) {
      raise(Errc::InvalidArgument, "heap_va_base not page-aligned");
    }
    free_frames_.reserve(cfg.frame_count);
    for (std::uint64_t i = 0; i < cfg.frame_count; ++i) {
      free_frames_.push_back(FrameId{i});
    }
  }

  const SimConfig& config() const { return cfg_; }
  SanitizationPolicy policy() const { return {cfg_.policy, cfg_.seed}; }
  std::uint64_t page_size() const { return cfg_.frame_size; }
  PhysicalMemory& mem() { return mem_; }
  const PhysicalMemory& mem() const { return mem_; }
  const std::vector<FrameId>& free_frames() const { return free_frames_; }

  int spawn(const WorkloadSpec& w) {
    validate_model_name(w.model_name);
    const std::uint64_t ps = cfg_.frame_size;
    const std::string path = model_path(w.model_name);
    if (path.size() + 1 + kStringsOffset > ps) {
      raise(Errc::InvalidArgument, "model name too long for strings page");
    }

    HeapLayout layout = compute_layout(w);
    const std::uint64_t heap_len = heap_length(w);
    const std::uint64_t pages = heap_len / ps;
    if (pages > free_frames_.size()) {
      raise(Errc::OutOfMemory, "need " + std::to_string(pages) + " frames, " +
                                   std::to_string(free_frames_.size()) +
                                   " free");
    }

    std::vector<FrameId> frames = take_frames(pages);

    Process p;
    p.pid = next_pid_++;
    p.ppid = cfg_.ppid;
    p.cmdline = "./" + w.model_name + " " + path + " ../images/001.jpg";
    p.state = ProcState::Running;
    p.heap_va_start = cfg_.heap_va_base;
    p.heap_va_end = cfg_.heap_va_base + heap_len;
    p.owned_frames = frames;
    p.workload = w;
    p.layout = layout;
    p.heap_image = build_heap_image(w, layout, heap_len, path);

    p.page_table.page_size = ps;
    const std::uint64_t vpn_base = p.heap_va_start / ps;
    for (std::uint64_t i = 0; i < pages; ++i) {
      PagemapEntry e;
      e.present = true;
      e.exclusive = true;
      e.pfn = frames[i].index;
      p.page_table.entries[vpn_base + i] = e;
      mem_.write_bytes(mem_.frame_base(frames[i]),
                       std::span(p.heap_image).subspan(i * ps, ps));
    }

    int pid = p.pid;
    processes_.emplace(pid, std::move(p));
    return pid;
  }

  void terminate(int pid) {
    Process& p = find_mut(pid);
    if (p.state == ProcState::Terminated) {
      raise(Errc::AlreadyTerminated, "pid " + std::to_string(pid));
    }
    std::vector<FrameId> frames = std::move(p.owned_frames);
    p.owned_frames.clear();
    p.frames_at_exit = frames;
    p.state = ProcState::Terminated;
    if (policy().scrubs_on_free()) {
      scrub_frames_on_free(frames);
    }
    // Freed frames rejoin the head of the free list (LIFO, so the next
    // spawn reuses them first); their bytes are left exactly as the process
    // last wrote them unless the policy scrubbed.
    free_frames_.insert(free_frames_.begin(), frames.begin(), frames.end());
  }

  /// Scrubs exactly the listed frames, refusing to touch any frame still
  /// owned by a Running process. Validation completes before the first
  /// scrub so a ForeignFrame error leaves memory untouched.
  void scrub_frames_on_free(std::span<const FrameId> frames) {
    std::set<std::uint64_t> live;
    for (const auto& [pid, proc] : processes_) {
      if (proc.state != ProcState::Running) continue;
      for (FrameId f : proc.owned_frames) live.insert(f.index);
    }
    for (FrameId f : frames) {
      if (f.index >= mem_.frame_count()) {
        raise(Errc::OutOfRange, "frame " + std::to_string(f.index));
      }
      if (live.count(f.index)) {
        raise(Errc::ForeignFrame,
              "frame " + std::to_string(f.index) + " owned by a running process",
              f.index);
      }
    }
    for (FrameId f : frames) mem_.scrub_frame(f, 0x00);
  }

  /// One line per Running process: PID PPID STIME CMD. Terminated pids are
  /// absent, as in a real process listing.
  std::string list_processes() const {
    std::string out;
    for (const auto& [pid, p] : processes_) {
      if (p.state != ProcState::Running) continue;
      char head[40];
      std::snprintf(head, sizeof head, "%5d %5d %s ", pid, p.ppid, kStime);
      out += head;
      out += p.cmdline;
      out += '\n';
    }
    return out;
  }

  std::string proc_maps(int pid) const {
    const Process& p = find_running(pid);
    MapsRecord heap;
    heap.start = p.heap_va_start;
    heap.end = p.heap_va_end;
    heap.perms = "rw-p";
    heap.file_offset = 0;
    heap.dev = "00:00";
    heap.inode = 0;
    heap.pathname = "[heap]";
    return render_maps_line(heap) + "\n";
  }

  Bytes proc_pagemap(int pid) const {
    const Process& p = find_running(pid);
    const std::uint64_t vpn_base = p.heap_va_start / cfg_.frame_size;
    const std::uint64_t pages = p.heap_len() / cfg_.frame_size;
    return serialize_pagemap(p.page_table, vpn_base, pages);
  }

  Bytes read_pagemap_range(int pid, std::uint64_t vpn_start,
                           std::uint64_t count) const {
    const Process& p = find_running(pid);
    return serialize_pagemap(p.page_table, vpn_start, count);
  }

  const Process& process(int pid) const {
    auto it = processes_.find(pid);
    if (it == processes_.end()) {
      raise(Errc::NoSuchPid, "pid " + std::to_string(pid));
    }
    return it->second;
  }

  bool has_process(int pid) const { return processes_.count(pid) != 0; }

  /// Heap byte offsets for a workload under this simulator's policy/seed,
  /// without spawning it.
  HeapLayout compute_layout(const WorkloadSpec& w) const {
    HeapLayout layout;
    layout.strings_offset = kStringsOffset;
    layout.image_len = w.image.size();
    const std::uint64_t blob_start = cfg_.frame_size;
    if (policy().randomizes_layout()) {
      std::mt19937_64 rng(layout_key(w));
      layout.image_offset = blob_start + draw_below(rng, w.extra_blob_len + 1);
    } else {
      layout.image_offset = blob_start + w.extra_blob_len;
    }
    return layout;
  }

  std::uint64_t heap_length(const WorkloadSpec& w) const {
    const std::uint64_t ps = cfg_.frame_size;
    const std::uint64_t raw = ps + w.extra_blob_len + w.image.size();
    return (raw + ps - 1) / ps * ps;
  }

  static std::string model_path(const std::string& model_name) {
    return "/usr/share/vitis_ai_library/models/" + model_name + "/" +
           model_name + ".xmodel";
  }

 private:
  static constexpr std::uint64_t kStringsOffset = 64;
  static constexpr const char* kStime = "12:33";

  static void validate_model_name(const std::string& name) {
    if (name.empty()) raise(Errc::InvalidArgument, "empty model name");
    for (char c : name) {
      bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                (c >= '0' && c <= '9') || c == '_';
      if (!ok) raise(Errc::InvalidArgument, "model name must match [A-Za-z0-9_]+");
    }
  }

  // Layout and filler are keyed by (allocator seed, model, image_len,
  // extra_blob_len) only. Image content and spawn order must not leak in:
  // profiling with a sentinel image has to land on the same offsets as a
  // later victim run.
  std::uint64_t layout_key(const WorkloadSpec& w) const {
    return mix64(cfg_.seed,
                 mix64(fnv1a64(w.model_name), mix64(w.image.size(), w.extra_blob_len)));
  }

  Bytes build_heap_image(const WorkloadSpec& w, const HeapLayout& layout,
                         std::uint64_t heap_len, const std::string& path) const {
    Bytes buf(heap_len, 0);
    std::copy(path.begin(), path.end(), buf.begin() + layout.strings_offset);
    // NUL already there (zero fill).

    // Filler bytes avoid the 0x55/0xFF sentinel values so sentinel scans
    // never extend past the true image boundaries.
    const std::uint64_t blob_start = cfg_.frame_size;
    Bytes filler = random_bytes(mix64(layout_key(w), 0x66696c6cULL),
                                w.extra_blob_len);
    for (auto& b : filler) {
      if (b == 0x55) b = 0x54;
      if (b == 0xFF) b = 0xFE;
    }
    const std::uint64_t before = layout.image_offset - blob_start;
    std::copy(filler.begin(), filler.begin() + static_cast<std::ptrdiff_t>(before),
              buf.begin() + blob_start);
    std::copy(filler.begin() + static_cast<std::ptrdiff_t>(before), filler.end(),
              buf.begin() + layout.image_offset + layout.image_len);

    std::copy(w.image.begin(), w.image.end(), buf.begin() + layout.image_offset);
    return buf;
  }

  std::vector<FrameId> take_frames(std::uint64_t pages) {
    std::vector<FrameId> out;
    out.reserve(pages);
    if (policy().randomizes_layout()) {
      for (std::uint64_t i = 0; i < pages; ++i) {
        std::size_t k = static_cast<std::size_t>(
            draw_below(place_rng_, free_frames_.size()));
        out.push_back(free_frames_[k]);
        free_frames_.erase(free_frames_.begin() + static_cast<std::ptrdiff_t>(k));
      }
    } else {
      // First fit over the ordered free list.
      out.assign(free_frames_.begin(),
                 free_frames_.begin() + static_cast<std::ptrdiff_t>(pages));
      free_frames_.erase(free_frames_.begin(),
                         free_frames_.begin() + static_cast<std::ptrdiff_t>(pages));
    }
    return out;
  }

  const Process& find_running(int pid) const {
    const Process& p = process(pid);
    if (p.state == ProcState::Terminated) {
      raise(Errc::TerminatedPid, "pid " + std::to_string(pid) + " has exited");
    }
    return p;
  }

  Process& find_mut(int pid) {
    auto it = processes_.find(pid);
    if (it == processes_.end()) {
      raise(Errc::NoSuchPid, "pid " + std::to_string(pid));
    }
    return it->second;
  }

  SimConfig cfg_;
  PhysicalMemory mem_;
  int next_pid_;
  std::map<int, Process> processes_;
  std::vector<FrameId> free_frames_;
  std::mt19937_64 place_rng_;
};

}  // namespace memscrape
