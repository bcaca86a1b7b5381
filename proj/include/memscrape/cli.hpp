#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "memscrape/analysis.hpp"
#include "memscrape/defense.hpp"
#include "memscrape/pipeline.hpp"
#include "memscrape/provider.hpp"
#include "memscrape/scenario.hpp"

namespace memscrape::cli {

// Exit codes, one per pipeline outcome:
//   0   success (attack: image reconstructed)
//   1   runtime failure, message names the failed step
//   2   attack: model identified, image not reconstructed
//   3   attack: nothing recovered
//   64  usage error
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitModelOnly = 2;
inline constexpr int kExitNothing = 3;
inline constexpr int kExitUsage = 64;

namespace detail {

inline const char* step_of(Errc c) {
  switch (c) {
    case Errc::NotFound:
      return "step 1 (polling for pid)";
    case Errc::NoHeap:
    case Errc::AmbiguousHeap:
    case Errc::MalformedLine:
    case Errc::IncompleteTranslation:
    case Errc::PermissionDenied:
      return "step 2 (address capture)";
    case Errc::StillRunning:
      return "step 3 (await termination)";
    case Errc::OutOfRange:
    case Errc::Unaligned:
      return "step 3 (residue extraction)";
    case Errc::OffsetOutOfRange:
      return "step 4 (analysis)";
    default:
      return "pipeline";
  }
}

inline void write_file(const std::filesystem::path& p,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoError, "short write to " + p.string());
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + p.string());
  out << text;
  if (!out) raise(Errc::IoError, "short write to " + p.string());
}

inline Bytes read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + p.string());
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  return data;
}

struct AttackOpts {
  std::string scenario_path;
  std::string outdir = ".";
  std::string profile_path;
  std::string signatures_path;
  std::string policy;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string pattern;
  int budget = 1000;
  std::uint32_t width = 224;
  std::uint32_t height = 224;
  bool live = false;
  std::string proc_root = "/proc";
  std::string mem_path = "/dev/mem";
};

inline int do_attack(const AttackOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ModelSignature> sigs = o.signatures_path.empty()
                                         ? default_signatures()
                                         : load_signatures(o.signatures_path);

  Scenario scenario;
  std::optional<Simulator> sim;
  std::optional<LiveProvider> live;
  ScrapeArtifacts art;

  std::string pattern = o.pattern;
  if (o.live) {
    err << "WARNING: --live reads real procfs and physical memory. Use only "
           "on systems you are authorized to test.\n";
    if (pattern.empty()) {
      err << "usage error: --live requires --pattern\n";
      return kExitUsage;
    }
    live.emplace(o.proc_root, o.mem_path);
    art = run_scrape(*live, {pattern, o.budget});
  } else {
    if (o.scenario_path.empty()) {
      err << "usage error: attack requires --scenario (or --live)\n";
      return kExitUsage;
    }
    std::ifstream in(o.scenario_path);
    if (!in) {
      err << "usage error: cannot open scenario " << o.scenario_path << "\n";
      return kExitUsage;
    }
    scenario = parse_scenario(in);
    if (!o.policy.empty()) scenario.config.policy = parse_policy(o.policy);
    if (o.seed_set) scenario.config.seed = o.seed;
    if (pattern.empty()) pattern = scenario.pattern;
    if (pattern.empty()) {
      err << "usage error: no pattern in scenario and no --pattern\n";
      return kExitUsage;
    }
    sim.emplace(scenario.config);
    art = run_attack(*sim, scenario.events, {pattern, o.budget});
  }

  std::filesystem::create_directories(o.outdir);
  const std::filesystem::path outdir(o.outdir);
  const std::string stem = std::to_string(art.pid);
  write_file(outdir / (stem + "_heap.bin"), art.dump.bytes);
  write_file(outdir / (stem + "_hexdump.log"), art.dump.hexdump);

  MatchReport report = identify_model(art.dump, sigs);

  std::string recon_status = "not-attempted";
  Bytes recon;
  if (!o.profile_path.empty()) {
    ProfileRecord profile = load_profile(o.profile_path);
    try {
      recon = reconstruct_image(art.dump, profile);
      if (sim) {
        recon_status = recon == sim->process(art.pid).workload.image
                           ? "verified"
                           : "mismatch";
      } else {
        recon_status = "unverified";
      }
    } catch (const Error& e) {
      recon_status = std::string("failed:") + errc_name(e.code());
    }
    if (!recon.empty()) {
      if (recon.size() == static_cast<std::size_t>(o.width) * o.height * 3) {
        export_image(recon, o.width, o.height, outdir / (stem + "_image.ppm"));
      } else {
        write_file(outdir / (stem + "_image.bin"), recon);
      }
    }
  }

  std::ostringstream rp;
  rp << "pid " << art.pid << "\n";
  rp << "model " << (report.model_name ? *report.model_name : "-") << "\n";
  rp << "match_count " << report.match_offsets.size() << "\n";
  for (std::size_t off : report.match_offsets) rp << "match_offset " << off << "\n";
  rp << "reconstruction " << recon_status << "\n";
  write_file(outdir / (stem + "_report.txt"), rp.str());

  out << "pid " << art.pid << "\n";
  out << "model " << (report.model_name ? *report.model_name : "-") << "\n";
  out << "reconstruction " << recon_status << "\n";

  const bool recovered = recon_status == "verified" || recon_status == "unverified";
  if (recovered) return kExitSuccess;
  if (report.model_name) return kExitModelOnly;
  return kExitNothing;
}

struct ProfileOpts {
  std::string model;
  std::uint64_t image_len = 0;
  std::uint64_t seed = 0;
  std::uint64_t extra_blob = 65536;
  std::string policy = "none";
  std::string signatures_path;
  std::string out_path;
  std::string outdir = ".";
};

inline int do_profile(const ProfileOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ModelSignature> sigs = o.signatures_path.empty()
                                         ? default_signatures()
                                         : load_signatures(o.signatures_path);
  bool known = false;
  for (const auto& s : sigs) known = known || s.name == o.model;
  if (!known) {
    err << "error: model '" << o.model << "' is not in the signature catalog\n";
    return kExitFailure;
  }

  SimConfig cfg;
  cfg.policy = parse_policy(o.policy);
  cfg.seed = o.seed;
  ProfileRecord rec = profile_offline(cfg, o.model, o.image_len, o.extra_blob);

  std::filesystem::create_directories(o.outdir);
  std::filesystem::path path = o.out_path.empty()
                                   ? std::filesystem::path(o.outdir) /
                                         (o.model + ".profile")
                                   : std::filesystem::path(o.out_path);
  save_profile(rec, path);
  out << "image_offset " << rec.image_offset << "\n";
  out << "wrote " << path.string() << "\n";
  return kExitSuccess;
}

struct EvalOpts {
  std::string policies;
  int trials = 0;
  std::uint64_t seed = 42;
  std::string model = "resnet50_pt";
  std::uint64_t image_len = 150528;
  std::uint64_t extra_blob = 65536;
};

inline int do_defend_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  if (o.trials < 1) {
    err << "usage error: --trials must be >= 1\n";
    return kExitUsage;
  }
  std::vector<PolicyKind> kinds;
  std::istringstream ps(o.policies);
  std::string token;
  while (std::getline(ps, token, ',')) {
    if (token.empty()) continue;
    try {
      kinds.push_back(parse_policy(token));
    } catch (const Error&) {
      err << "usage error: unknown policy '" << token << "'\n";
      return kExitUsage;
    }
  }
  if (kinds.empty()) {
    err << "usage error: --policies lists no policies\n";
    return kExitUsage;
  }

  EvalSpec spec;
  spec.base.seed = o.seed;
  spec.model = o.model;
  spec.image_len = o.image_len;
  spec.extra_blob = o.extra_blob;

  std::vector<PolicyEval> evals;
  evals.reserve(kinds.size());
  for (PolicyKind k : kinds) evals.push_back(evaluate_policy(k, o.trials, spec));
  out << render_eval_report(evals);
  return kExitSuccess;
}

inline int do_hexdump(const std::string& path, std::ostream& out,
                      std::ostream& err) {
  Bytes data;
  try {
    data = read_file_bytes(path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  out << hexdump(data);
  return kExitSuccess;
}

struct SimulateOpts {
  std::string scenario_path;
  std::string out_path;
  std::string outdir = ".";
};

inline int do_simulate(const SimulateOpts& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.scenario_path);
  if (!in) {
    err << "usage error: cannot open scenario " << o.scenario_path << "\n";
    return kExitUsage;
  }
  Scenario sc = parse_scenario(in);
  Simulator sim(sc.config);
  ScenarioRunner runner(sim, sc.events);
  runner.run_all();

  std::filesystem::create_directories(o.outdir);
  std::filesystem::path path = o.out_path.empty()
                                   ? std::filesystem::path(o.outdir) / "dram.bin"
                                   : std::filesystem::path(o.out_path);
  write_file(path, sim.mem().store());

  for (const auto& [tag, pid] : runner.pids()) {
    const Process& p = sim.process(pid);
    out << tag << " pid=" << pid << " state="
        << (p.state == ProcState::Running ? "running" : "terminated")
        << " heap=0x" << to_hex(p.heap_va_start) << "-0x" << to_hex(p.heap_va_end)
        << " image_offset=" << p.layout.image_offset << "\n";
  }
  out << "free_frames " << sim.free_frames().size() << "\n";
  out << "wrote " << path.string() << "\n";
  return kExitSuccess;
}

}  // namespace detail

/// Entry point shared by the real binary and the in-process tests.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"memscrape: a desk-scale memory-residue scraping laboratory"};
  app.require_subcommand(1);

  detail::AttackOpts attack;
  auto* atk = app.add_subcommand(
      "attack", "Run the full pipeline: poll, capture, extract, analyze");
  atk->add_option("--scenario", attack.scenario_path, "Scenario file");
  atk->add_option("--outdir", attack.outdir, "Artifact directory");
  atk->add_option("--profile", attack.profile_path, "Profile record for reconstruction");
  atk->add_option("--signatures", attack.signatures_path, "Signature database file");
  atk->add_option("--policy", attack.policy,
                  "Override policy (none|zero|randomize|zero+randomize)");
  auto* atk_seed = atk->add_option("--seed", attack.seed, "Override allocator seed");
  atk->add_option("--pattern", attack.pattern, "Victim CMD substring");
  atk->add_option("--budget", attack.budget, "Poll attempt budget");
  atk->add_option("--width", attack.width, "Reconstructed image width");
  atk->add_option("--height", attack.height, "Reconstructed image height");
  atk->add_flag("--live", attack.live, "Attack the real system instead of a scenario");
  atk->add_option("--proc-root", attack.proc_root, "procfs root for --live");
  atk->add_option("--mem-path", attack.mem_path, "Physical memory device for --live");

  detail::ProfileOpts profile;
  auto* prof = app.add_subcommand(
      "profile", "Offline-profile a model's image offset with a 0x55 image");
  prof->add_option("--model", profile.model, "Model name")->required();
  prof->add_option("--image-len", profile.image_len, "Image length in bytes")
      ->required();
  prof->add_option("--seed", profile.seed, "Allocator seed");
  prof->add_option("--extra-blob", profile.extra_blob, "Filler blob length");
  prof->add_option("--policy", profile.policy, "Simulator policy");
  prof->add_option("--signatures", profile.signatures_path, "Signature database file");
  prof->add_option("--out", profile.out_path, "Profile output path");
  prof->add_option("--outdir", profile.outdir, "Artifact directory");

  detail::EvalOpts eval;
  auto* dev = app.add_subcommand("defend-eval",
                                 "Measure attack success under each policy");
  dev->add_option("--policies", eval.policies, "Comma-separated policy list")
      ->required();
  dev->add_option("--trials", eval.trials, "Trials per policy")->required();
  dev->add_option("--seed", eval.seed, "Base seed");
  dev->add_option("--model", eval.model, "Victim model name");
  dev->add_option("--image-len", eval.image_len, "Victim image length");
  dev->add_option("--extra-blob", eval.extra_blob, "Filler blob length");

  std::string hexdump_path;
  auto* hex = app.add_subcommand("hexdump", "Hexdump a file to stdout");
  hex->add_option("file", hexdump_path, "Input file")->required();

  detail::SimulateOpts simulate;
  auto* simu = app.add_subcommand("simulate",
                                  "Run a scenario and dump the final DRAM state");
  simu->add_option("--scenario", simulate.scenario_path, "Scenario file")
      ->required();
  simu->add_option("--out", simulate.out_path, "DRAM dump path");
  simu->add_option("--outdir", simulate.outdir, "Artifact directory");

  std::vector<const char*> argv;
  argv.push_back("memscrape");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitSuccess;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  attack.seed_set = atk_seed->count() > 0;

  try {
    if (atk->parsed()) return detail::do_attack(attack, out, err);
    if (prof->parsed()) return detail::do_profile(profile, out, err);
    if (dev->parsed()) return detail::do_defend_eval(eval, out, err);
    if (hex->parsed()) return detail::do_hexdump(hexdump_path, out, err);
    if (simu->parsed()) return detail::do_simulate(simulate, out, err);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidArgument || e.code() == Errc::MalformedLine) {
      err << "usage error: " << e.what() << "\n";
      return kExitUsage;
    }
    err << "error in " << detail::step_of(e.code()) << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace memscrape::cli
