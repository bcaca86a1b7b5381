#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "memscrape/error.hpp"
#include "memscrape/target.hpp"
#include "memscrape/util.hpp"

namespace memscrape {

/// One scripted lifecycle step. Spawned processes are addressed by tag so
/// scripts stay readable when pids shift with the pid base.
struct ScenarioEvent {
  enum class Kind { Spawn, Terminate };
  enum class ImageFill { Random, Zeros, Byte };

  Kind kind = Kind::Spawn;
  std::string tag;

  // Spawn fields.
  std::string model;
  std::uint64_t image_len = 0;
  ImageFill fill = ImageFill::Random;
  std::uint8_t fill_byte = 0;
  std::uint64_t image_seed = 0;
  std::uint64_t extra_blob = 65536;
};

struct Scenario {
  SimConfig config;
  std::string pattern;  // what the attacker polls for
  std::vector<ScenarioEvent> events;
};

inline WorkloadSpec make_workload(const ScenarioEvent& e) {
  WorkloadSpec w;
  w.model_name = e.model;
  w.extra_blob_len = e.extra_blob;
  w.seed = e.image_seed;
  switch (e.fill) {
    case ScenarioEvent::ImageFill::Random:
      w.image = random_bytes(e.image_seed, e.image_len);
      break;
    case ScenarioEvent::ImageFill::Zeros:
      w.image.assign(e.image_len, 0x00);
      break;
    case ScenarioEvent::ImageFill::Byte:
      w.image.assign(e.image_len, e.fill_byte);
      break;
  }
  return w;
}

namespace detail {

inline std::uint64_t parse_u64(const std::string& s, int lineno) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used, 0);  // accepts decimal and 0x
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    raise(Errc::MalformedLine,
          "line " + std::to_string(lineno) + ": bad integer '" + s + "'",
          static_cast<std::uint64_t>(lineno));
  }
}

inline std::map<std::string, std::string> parse_kv(std::istringstream& in,
                                                   int lineno) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= tok.size()) {
      raise(Errc::MalformedLine,
            "line " + std::to_string(lineno) + ": expected key=value, got '" +
                tok + "'",
            static_cast<std::uint64_t>(lineno));
    }
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

/// Line-oriented scenario grammar. Config directives first, then events:
///
///   dram_frames 4096
///   frame_size 4096
///   policy none
///   seed 42
///   pid_base 1391
///   heap_va_base 0xaaaaee775000
///   pattern resnet50
///   spawn v1 model=resnet50_pt image_len=150528 image=random image_seed=7 extra_blob=65536
///   terminate v1
///
/// image is one of random|zeros|0xNN. Unknown directives or keys fail; a
/// scenario that silently drops fields is not diff-stable.
inline Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  std::map<std::string, bool> spawned;
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& why) -> void {
    raise(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + why,
          static_cast<std::uint64_t>(lineno));
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || word[0] == '#') continue;

    if (word == "dram_frames" || word == "frame_size" || word == "seed" ||
        word == "pid_base" || word == "heap_va_base") {
      std::string value;
      if (!(ls >> value)) bad("missing value for " + word);
      std::uint64_t v = detail::parse_u64(value, lineno);
      if (word == "dram_frames") sc.config.frame_count = v;
      else if (word == "frame_size") sc.config.frame_size = v;
      else if (word == "seed") sc.config.seed = v;
      else if (word == "pid_base") sc.config.pid_base = static_cast<int>(v);
      else sc.config.heap_va_base = v;
    } else if (word == "policy") {
      std::string value;
      if (!(ls >> value)) bad("missing policy value");
      try {
        sc.config.policy = parse_policy(value);
      } catch (const Error&) {
        bad("unknown policy '" + value + "'");
      }
    } else if (word == "pattern") {
      if (!(ls >> sc.pattern)) bad("missing pattern value");
    } else if (word == "spawn") {
      ScenarioEvent e;
      e.kind = ScenarioEvent::Kind::Spawn;
      if (!(ls >> e.tag)) bad("spawn needs a tag");
      if (spawned.count(e.tag)) bad("duplicate spawn tag '" + e.tag + "'");
      auto kv = detail::parse_kv(ls, lineno);
      if (!kv.count("model")) bad("spawn needs model=");
      if (!kv.count("image_len")) bad("spawn needs image_len=");
      for (const auto& [k, v] : kv) {
        if (k == "model") {
          e.model = v;
        } else if (k == "image_len") {
          e.image_len = detail::parse_u64(v, lineno);
        } else if (k == "image_seed") {
          e.image_seed = detail::parse_u64(v, lineno);
        } else if (k == "extra_blob") {
          e.extra_blob = detail::parse_u64(v, lineno);
        } else if (k == "image") {
          if (v == "random") {
            e.fill = ScenarioEvent::ImageFill::Random;
          } else if (v == "zeros") {
            e.fill = ScenarioEvent::ImageFill::Zeros;
          } else if (v.rfind("0x", 0) == 0) {
            e.fill = ScenarioEvent::ImageFill::Byte;
            std::uint64_t b = detail::parse_u64(v, lineno);
            if (b > 0xFF) bad("image fill byte out of range");
            e.fill_byte = static_cast<std::uint8_t>(b);
          } else {
            bad("image must be random|zeros|0xNN");
          }
        } else {
          bad("unknown spawn key '" + k + "'");
        }
      }
      spawned[e.tag] = true;
      sc.events.push_back(std::move(e));
    } else if (word == "terminate") {
      ScenarioEvent e;
      e.kind = ScenarioEvent::Kind::Terminate;
      if (!(ls >> e.tag)) bad("terminate needs a tag");
      if (!spawned.count(e.tag)) bad("terminate of unknown tag '" + e.tag + "'");
      std::string extra;
      if (ls >> extra) bad("unexpected token '" + extra + "'");
      sc.events.push_back(std::move(e));
    } else {
      bad("unknown directive '" + word + "'");
    }
  }
  return sc;
}

inline Scenario parse_scenario(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

/// Applies scenario events to a simulator one at a time, resolving tags to
/// the pids the simulator hands out.
class ScenarioRunner {
 public:
  ScenarioRunner(Simulator& sim, std::vector<ScenarioEvent> events)
      : sim_(sim), events_(std::move(events)) {}

  bool done() const { return next_ >= events_.size(); }

  /// Applies the next event. Returns false when the script is exhausted.
  bool step() {
    if (done()) return false;
    const ScenarioEvent& e = events_[next_++];
    if (e.kind == ScenarioEvent::Kind::Spawn) {
      pids_[e.tag] = sim_.spawn(make_workload(e));
    } else {
      sim_.terminate(pids_.at(e.tag));
    }
    return true;
  }

  void run_all() {
    while (step()) {
    }
  }

  const std::map<std::string, int>& pids() const { return pids_; }

 private:
  Simulator& sim_;
  std::vector<ScenarioEvent> events_;
  std::size_t next_ = 0;
  std::map<std::string, int> pids_;
};

}  // namespace memscrape
