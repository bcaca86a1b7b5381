#pragma once

#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "memscrape/analysis.hpp"
#include "memscrape/error.hpp"
#include "memscrape/pipeline.hpp"
#include "memscrape/policy.hpp"
#include "memscrape/target.hpp"

namespace memscrape {

struct AttackOutcome {
  bool model_identified = false;
  bool image_recovered = false;          // byte-exact
  double bytes_leaked_fraction = 0.0;    // verbatim dump bytes / victim bytes
};

struct PolicyEval {
  PolicyKind policy = PolicyKind::None;
  int trials = 0;
  double id_rate = 0.0;
  double recovery_rate = 0.0;
  double mean_leaked_fraction = 0.0;
};

/// Scrub request routed through the simulator's foreign-frame check: either
/// every listed frame is scrubbed or none is.
inline void scrub_on_free_hook(Simulator& sim, std::span<const FrameId> frames) {
  sim.scrub_frames_on_free(frames);
}

/// Fraction of victim heap bytes reproduced verbatim in the dump. Positions
/// where the victim byte is 0x00 are excluded from both sides: a zero match
/// is indistinguishable from scrubbed memory and must not count as leakage.
/// An all-zero victim leaks nothing by definition.
inline double leaked_fraction(std::span<const std::uint8_t> victim_heap,
                              std::span<const std::uint8_t> dump) {
  if (victim_heap.size() != dump.size()) {
    raise(Errc::LengthMismatch, std::to_string(victim_heap.size()) + " vs " +
                                    std::to_string(dump.size()) + " bytes");
  }
  std::uint64_t considered = 0;
  std::uint64_t matched = 0;
  for (std::size_t i = 0; i < victim_heap.size(); ++i) {
    if (victim_heap[i] == 0x00) continue;
    ++considered;
    if (victim_heap[i] == dump[i]) ++matched;
  }
  return considered == 0 ? 0.0
                         : static_cast<double>(matched) /
                               static_cast<double>(considered);
}

struct EvalSpec {
  SimConfig base;                       // seed here is the profiling seed
  std::string model = "resnet50_pt";
  std::uint64_t image_len = 150528;     // 224*224*3
  std::uint64_t extra_blob = 65536;
};

/// One full attack against a fresh simulator, scored against ground truth.
inline AttackOutcome run_attack_trial(const SimConfig& cfg,
                                      const std::string& model,
                                      std::uint64_t image_len,
                                      std::uint64_t extra_blob,
                                      std::uint64_t content_seed,
                                      const ProfileRecord& profile,
                                      const std::vector<ModelSignature>& sigs) {
  Simulator sim(cfg);

  ScenarioEvent spawn;
  spawn.kind = ScenarioEvent::Kind::Spawn;
  spawn.tag = "victim";
  spawn.model = model;
  spawn.image_len = image_len;
  spawn.fill = ScenarioEvent::ImageFill::Random;
  spawn.image_seed = content_seed;
  spawn.extra_blob = extra_blob;
  ScenarioEvent term;
  term.kind = ScenarioEvent::Kind::Terminate;
  term.tag = "victim";

  ScrapeArtifacts art = run_attack(sim, {spawn, term}, {model});
  const Process& victim = sim.process(art.pid);

  AttackOutcome out;
  MatchReport report = identify_model(art.dump, sigs);
  out.model_identified = report.model_name && *report.model_name == model;
  try {
    Bytes recon = reconstruct_image(art.dump, profile);
    out.image_recovered = recon == victim.workload.image;
  } catch (const Error&) {
    out.image_recovered = false;
  }
  out.bytes_leaked_fraction = leaked_fraction(victim.heap_image, art.dump.bytes);
  return out;
}

/// Runs `trials` independent attacks under `policy` and aggregates. The
/// attacker's profile is built once from the base seed; randomized policies
/// give every trial a fresh seed, so the profile goes stale — exactly the
/// situation layout randomization is meant to create.
inline PolicyEval evaluate_policy(PolicyKind policy, int trials,
                                  const EvalSpec& spec) {
  if (trials < 1) raise(Errc::InvalidArgument, "trials must be >= 1");

  const bool randomizes = SanitizationPolicy{policy}.randomizes_layout();

  SimConfig profile_cfg = spec.base;
  profile_cfg.policy =
      randomizes ? PolicyKind::RandomizedLayout : PolicyKind::None;
  ProfileRecord profile =
      profile_offline(profile_cfg, spec.model, spec.image_len, spec.extra_blob);

  auto sigs = default_signatures();
  PolicyEval eval;
  eval.policy = policy;
  eval.trials = trials;
  for (int t = 0; t < trials; ++t) {
    SimConfig cfg = spec.base;
    cfg.policy = policy;
    if (randomizes) cfg.seed = spec.base.seed + 1 + static_cast<std::uint64_t>(t);
    AttackOutcome o =
        run_attack_trial(cfg, spec.model, spec.image_len, spec.extra_blob,
                         mix64(spec.base.seed, 0xC0FFEE + static_cast<std::uint64_t>(t)),
                         profile, sigs);
    eval.id_rate += o.model_identified ? 1.0 : 0.0;
    eval.recovery_rate += o.image_recovered ? 1.0 : 0.0;
    eval.mean_leaked_fraction += o.bytes_leaked_fraction;
  }
  eval.id_rate /= trials;
  eval.recovery_rate /= trials;
  eval.mean_leaked_fraction /= trials;
  return eval;
}

/// Text table, stable column order; one machine-readable line per policy
/// follows the table.
inline std::string render_eval_report(std::span<const PolicyEval> evals) {
  char buf[160];
  std::string out =
      "policy            trials   id_rate  recovery_rate  mean_leaked_fraction\n";
  for (const auto& e : evals) {
    std::snprintf(buf, sizeof buf, "%-16s %7d %9.4f %14.4f %21.6f\n",
                  policy_name(e.policy).c_str(), e.trials, e.id_rate,
                  e.recovery_rate, e.mean_leaked_fraction);
    out += buf;
  }
  for (const auto& e : evals) {
    std::snprintf(buf, sizeof buf,
                  "eval policy=%s trials=%d id_rate=%.6f recovery_rate=%.6f "
                  "mean_leaked_fraction=%.6f\n",
                  policy_name(e.policy).c_str(), e.trials, e.id_rate,
                  e.recovery_rate, e.mean_leaked_fraction);
    out += buf;
  }
  return out;
}

/// Parses one `eval ...` key/value line back into a PolicyEval.
inline PolicyEval parse_eval_line(const std::string& line) {
  std::istringstream in(line);
  std::string word;
  if (!(in >> word) || word != "eval") {
    raise(Errc::MalformedLine, "expected 'eval' line, got: " + line);
  }
  PolicyEval e;
  bool saw[5] = {};
  while (in >> word) {
    auto eq = word.find('=');
    if (eq == std::string::npos) raise(Errc::MalformedLine, "bad token " + word);
    std::string key = word.substr(0, eq);
    std::string value = word.substr(eq + 1);
    if (key == "policy") {
      e.policy = parse_policy(value);
      saw[0] = true;
    } else if (key == "trials") {
      e.trials = std::stoi(value);
      saw[1] = true;
    } else if (key == "id_rate") {
      e.id_rate = std::stod(value);
      saw[2] = true;
    } else if (key == "recovery_rate") {
      e.recovery_rate = std::stod(value);
      saw[3] = true;
    } else if (key == "mean_leaked_fraction") {
      e.mean_leaked_fraction = std::stod(value);
      saw[4] = true;
    } else {
      raise(Errc::MalformedLine, "unknown eval key " + key);
    }
  }
  for (bool s : saw) {
    if (!s) raise(Errc::MalformedLine, "incomplete eval line: " + line);
  }
  return e;
}

}  // namespace memscrape
