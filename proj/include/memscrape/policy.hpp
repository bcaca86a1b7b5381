#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "memscrape/error.hpp"

namespace memscrape {

enum class PolicyKind { None, ZeroOnFree, RandomizedLayout, ZeroAndRandomize };

/// What the platform does with a terminating process's frames and layout.
/// None reproduces the flawed default: frames go back to the free list with
/// their contents intact.
struct SanitizationPolicy {
  PolicyKind kind = PolicyKind::None;
  std::uint64_t seed = 0;  // drives placement/layout for randomized variants

  bool scrubs_on_free() const {
    return kind == PolicyKind::ZeroOnFree || kind == PolicyKind::ZeroAndRandomize;
  }
  bool randomizes_layout() const {
    return kind == PolicyKind::RandomizedLayout ||
           kind == PolicyKind::ZeroAndRandomize;
  }
};

inline std::string policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::None: return "none";
    case PolicyKind::ZeroOnFree: return "zero";
    case PolicyKind::RandomizedLayout: return "randomize";
    case PolicyKind::ZeroAndRandomize: return "zero+randomize";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "none") return PolicyKind::None;
  if (s == "zero") return PolicyKind::ZeroOnFree;
  if (s == "randomize") return PolicyKind::RandomizedLayout;
  if (s == "zero+randomize") return PolicyKind::ZeroAndRandomize;
  raise(Errc::InvalidArgument, "unknown policy '" + std::string(s) +
                                   "' (none|zero|randomize|zero+randomize)");
}

}  // namespace memscrape
