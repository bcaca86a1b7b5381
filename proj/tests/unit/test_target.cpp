#include <algorithm>
#include <functional>
#include <set>

#include "catch_amalgamated.hpp"
#include "memscrape/target.hpp"
#include "support/test_support.hpp"

using namespace memscrape;
using test_support::checksum;
using test_support::checksum_frames;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

WorkloadSpec workload(const std::string& model, Bytes image,
                      std::uint64_t blob = 16384) {
  WorkloadSpec w;
  w.model_name = model;
  w.image = std::move(image);
  w.extra_blob_len = blob;
  return w;
}

Bytes heap_via_frames(const Simulator& sim, const Process& p,
                      const std::vector<FrameId>& frames) {
  Bytes out;
  for (FrameId f : frames) {
    Bytes chunk = sim.mem().read_range(sim.mem().frame_base(f), sim.page_size());
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  (void)p;
  return out;
}

}  // namespace

TEST_CASE("first spawn gets the pid base", "[target]") {
  Simulator sim;
  int pid = sim.spawn(workload("resnet50_pt", random_bytes(1, 8192)));
  CHECK(pid == 1391);
  CHECK(sim.spawn(workload("squeezenet", random_bytes(2, 8192))) == 1392);
}

TEST_CASE("heap content: path string, filler, image at the recorded offsets",
          "[target]") {
  Simulator sim;
  Bytes image(8192, 0xFF);  // the corrupted-image setup
  int pid = sim.spawn(workload("resnet50_pt", image));
  const Process& p = sim.process(pid);

  Bytes heap = heap_via_frames(sim, p, p.owned_frames);
  REQUIRE(heap.size() == p.heap_len());

  const std::string path =
      "/usr/share/vitis_ai_library/models/resnet50_pt/resnet50_pt.xmodel";
  const std::string found(heap.begin() + static_cast<long>(p.layout.strings_offset),
                          heap.begin() + static_cast<long>(p.layout.strings_offset +
                                                           path.size()));
  CHECK(found == path);

  for (std::uint64_t i = 0; i < p.layout.image_len; ++i) {
    REQUIRE(heap[p.layout.image_offset + i] == 0xFF);
  }
  // Filler never contains sentinel bytes, so the 0xFF run is exactly the image.
  CHECK(heap[p.layout.image_offset - 1] != 0xFF);
  CHECK(heap == p.heap_image);
}

TEST_CASE("concurrent spawns own disjoint frames", "[target]") {
  Simulator sim;
  int a = sim.spawn(workload("resnet50_pt", random_bytes(1, 65536)));
  int b = sim.spawn(workload("squeezenet", random_bytes(2, 65536)));

  std::set<std::uint64_t> fa, fb;
  for (FrameId f : sim.process(a).owned_frames) fa.insert(f.index);
  for (FrameId f : sim.process(b).owned_frames) fb.insert(f.index);
  std::vector<std::uint64_t> both;
  std::set_intersection(fa.begin(), fa.end(), fb.begin(), fb.end(),
                        std::back_inserter(both));
  CHECK(both.empty());
}

TEST_CASE("terminate under policy None leaves residue intact", "[target]") {
  Simulator sim;
  int pid = sim.spawn(workload("resnet50_pt", random_bytes(3, 30000)));
  const Process& p = sim.process(pid);
  std::vector<FrameId> frames = p.owned_frames;
  std::uint64_t before = checksum_frames(sim.mem(), frames);

  sim.terminate(pid);
  CHECK(checksum_frames(sim.mem(), frames) == before);
  CHECK(sim.process(pid).state == ProcState::Terminated);
  CHECK(sim.process(pid).owned_frames.empty());
  CHECK(sim.process(pid).frames_at_exit == frames);
}

TEST_CASE("terminate under ZeroOnFree scrubs exactly the freed frames", "[target]") {
  SimConfig cfg;
  cfg.policy = PolicyKind::ZeroOnFree;
  Simulator sim(cfg);
  int victim = sim.spawn(workload("resnet50_pt", random_bytes(3, 30000)));
  int tenant = sim.spawn(workload("squeezenet", random_bytes(4, 30000)));

  std::vector<FrameId> vframes = sim.process(victim).owned_frames;
  std::uint64_t tenant_before =
      checksum_frames(sim.mem(), sim.process(tenant).owned_frames);

  sim.terminate(victim);
  for (FrameId f : vframes) {
    for (std::uint8_t b : sim.mem().read_range(sim.mem().frame_base(f), 4096)) {
      REQUIRE(b == 0x00);
    }
  }
  CHECK(checksum_frames(sim.mem(), sim.process(tenant).owned_frames) ==
        tenant_before);
}

TEST_CASE("terminate error paths", "[target]") {
  Simulator sim;
  CHECK(code_of([&] { sim.terminate(9999); }) == Errc::NoSuchPid);
  int pid = sim.spawn(workload("resnet50_pt", random_bytes(1, 4096)));
  sim.terminate(pid);
  CHECK(code_of([&] { sim.terminate(pid); }) == Errc::AlreadyTerminated);
}

TEST_CASE("list_processes shows running pids only", "[target]") {
  Simulator sim;
  CHECK(sim.list_processes().empty());

  int pid = sim.spawn(workload("resnet50_pt", random_bytes(1, 4096)));
  std::string listing = sim.list_processes();
  CHECK(listing.find("./resnet50_pt") != std::string::npos);
  CHECK(listing.find(std::to_string(pid)) != std::string::npos);

  sim.terminate(pid);
  CHECK(sim.list_processes().find(" 1391 ") == std::string::npos);
}

TEST_CASE("proc_maps emits a parseable heap record", "[target]") {
  Simulator sim;
  int pid = sim.spawn(workload("resnet50_pt", random_bytes(1, 150528)));

  std::string maps = sim.proc_maps(pid);
  CHECK(maps.rfind("aaaaee775000-", 0) == 0);

  auto records = parse_maps(maps);  // every line must parse
  auto [start, end] = heap_range(records);
  CHECK(start == sim.process(pid).heap_va_start);
  CHECK(end == sim.process(pid).heap_va_end);

  sim.terminate(pid);
  CHECK(code_of([&] { sim.proc_maps(pid); }) == Errc::TerminatedPid);
  CHECK(code_of([&] { sim.proc_maps(4242); }) == Errc::NoSuchPid);
}

TEST_CASE("proc_pagemap covers every heap page with a valid frame", "[target]") {
  Simulator sim;
  int pid = sim.spawn(workload("resnet50_pt", random_bytes(1, 150528)));
  const Process& p = sim.process(pid);

  Bytes blob = sim.proc_pagemap(pid);
  const std::uint64_t pages = p.heap_len() / sim.page_size();
  REQUIRE(blob.size() == pages * 8);

  for (std::uint64_t i = 0; i < pages; ++i) {
    std::uint64_t raw = 0;
    for (int b = 7; b >= 0; --b) {
      raw = (raw << 8) | blob[i * 8 + static_cast<std::uint64_t>(b)];
    }
    PagemapEntry e = decode_entry(raw);
    REQUIRE(e.present);
    REQUIRE(e.pfn < sim.mem().frame_count());
  }

  // First heap page translates to the first owned frame.
  CHECK(translate(p.heap_va_start, p.page_table) ==
        sim.mem().frame_base(p.owned_frames.front()));

  sim.terminate(pid);
  CHECK(code_of([&] { sim.proc_pagemap(pid); }) == Errc::TerminatedPid);
}

TEST_CASE("identical scripts produce byte-identical simulators", "[target]") {
  auto run = [](Simulator& sim) {
    int a = sim.spawn(workload("resnet50_pt", random_bytes(9, 150528)));
    sim.spawn(workload("squeezenet", random_bytes(10, 30000)));
    std::string text = sim.list_processes() + sim.proc_maps(a);
    Bytes pm = sim.proc_pagemap(a);
    sim.terminate(a);
    return std::make_tuple(text, pm, checksum(sim.mem().store()));
  };

  SimConfig cfg;
  cfg.policy = PolicyKind::RandomizedLayout;
  cfg.seed = 77;
  Simulator s1(cfg), s2(cfg);
  CHECK(run(s1) == run(s2));
}

TEST_CASE("frame multiset is conserved across spawn/terminate churn", "[target]") {
  SimConfig cfg;
  cfg.frame_count = 256;
  Simulator sim(cfg);

  auto audit = [&](std::vector<int> live) {
    std::set<std::uint64_t> seen;
    for (FrameId f : sim.free_frames()) {
      REQUIRE(seen.insert(f.index).second);  // no duplicates
    }
    for (int pid : live) {
      for (FrameId f : sim.process(pid).owned_frames) {
        REQUIRE(seen.insert(f.index).second);
      }
    }
    REQUIRE(seen.size() == 256);
  };

  int a = sim.spawn(workload("resnet50_pt", random_bytes(1, 20000), 8192));
  int b = sim.spawn(workload("squeezenet", random_bytes(2, 20000), 8192));
  audit({a, b});
  sim.terminate(a);
  audit({b});
  int c = sim.spawn(workload("inception_v1", random_bytes(3, 60000), 8192));
  audit({b, c});
  sim.terminate(c);
  sim.terminate(b);
  audit({});
}

TEST_CASE("residue reproduces the final heap until frames are reused", "[target]") {
  SimConfig cfg;
  cfg.frame_count = 64;
  Simulator sim(cfg);

  int pid = sim.spawn(workload("resnet50_pt", random_bytes(5, 30000), 8192));
  Bytes truth = sim.process(pid).heap_image;
  sim.terminate(pid);

  const Process& p = sim.process(pid);
  CHECK(heap_via_frames(sim, p, p.frames_at_exit) == truth);

  // A new spawn that reuses the freed frames overwrites the residue.
  sim.spawn(workload("squeezenet", random_bytes(6, 30000), 8192));
  CHECK(heap_via_frames(sim, p, p.frames_at_exit) != truth);
}

TEST_CASE("image offset is stable across content and instances", "[target]") {
  SimConfig cfg;
  cfg.policy = PolicyKind::RandomizedLayout;
  cfg.seed = 1234;

  Simulator s1(cfg), s2(cfg);
  int a = s1.spawn(workload("resnet50_pt", Bytes(150528, 0x55)));
  int b = s2.spawn(workload("resnet50_pt", random_bytes(42, 150528)));
  CHECK(s1.process(a).layout.image_offset == s2.process(b).layout.image_offset);

  // Same instance, second spawn of the same shape: still the same offset.
  s1.terminate(a);
  int c = s1.spawn(workload("resnet50_pt", random_bytes(43, 150528)));
  CHECK(s1.process(c).layout.image_offset == s2.process(b).layout.image_offset);

  // A different allocator seed moves the image.
  SimConfig other = cfg;
  other.seed = 1235;
  Simulator s3(other);
  int d = s3.spawn(workload("resnet50_pt", random_bytes(44, 150528)));
  CHECK(s3.process(d).layout.image_offset != s2.process(b).layout.image_offset);
}

TEST_CASE("non-randomized layout puts the image right after the blob", "[target]") {
  Simulator sim;
  WorkloadSpec w = workload("resnet50_pt", random_bytes(3, 9999), 12345);
  int pid = sim.spawn(w);
  const HeapLayout& l = sim.process(pid).layout;
  CHECK(l.strings_offset == 64);
  CHECK(l.image_offset == sim.page_size() + 12345);
  CHECK(l.image_len == 9999);
}

TEST_CASE("config validation rejects a misaligned heap base", "[target]") {
  SimConfig cfg;
  cfg.heap_va_base = 0xaaaaee775123ULL;
  CHECK(code_of([&] { Simulator sim(cfg); }) == Errc::InvalidArgument);
}

TEST_CASE("spawn rejects bad workloads and full memory", "[target]") {
  Simulator sim;
  CHECK(code_of([&] { sim.spawn(workload("", {})); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { sim.spawn(workload("no spaces", {})); }) ==
        Errc::InvalidArgument);

  SimConfig tiny;
  tiny.frame_count = 4;
  Simulator small(tiny);
  CHECK(code_of([&] {
          small.spawn(workload("resnet50_pt", random_bytes(1, 150528)));
        }) == Errc::OutOfMemory);
  // Nothing was allocated by the failed spawn.
  CHECK(small.free_frames().size() == 4);
}
