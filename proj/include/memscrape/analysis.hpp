#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "memscrape/error.hpp"
#include "memscrape/pipeline.hpp"
#include "memscrape/scraper.hpp"
#include "memscrape/target.hpp"

namespace memscrape {

struct ModelSignature {
  std::string name;
  std::vector<std::string> keywords;  // nonempty byte patterns
};

struct MatchReport {
  std::optional<std::string> model_name;
  std::vector<std::size_t> match_offsets;  // set iff model_name is set
};

/// Offline-profiling result: where the input image sits inside the heap
/// for a given (model, image length, allocator seed).
struct ProfileRecord {
  std::string model_name;
  std::uint8_t sentinel = 0x55;
  std::uint64_t image_offset = 0;
  std::uint64_t image_len = 0;
  std::uint64_t allocator_seed = 0;
};

/// Vitis model-zoo names covered by the built-in database; a signature file
/// can replace it (one `name: keyword[,keyword...]` per line).
inline std::vector<ModelSignature> default_signatures() {
  static const char* kNames[] = {
      "resnet50_pt",      "squeezenet",   "inception_v1", "mobilenet_v2",
      "densenet_201",     "efficientnet_lite", "yolov4_tiny", "face_quality",
      "plate_ocr",        "pose_estimator",
  };
  std::vector<ModelSignature> sigs;
  for (const char* n : kNames) sigs.push_back({n, {n}});
  return sigs;
}

inline std::vector<ModelSignature> parse_signatures(std::istream& in) {
  std::vector<ModelSignature> sigs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos || colon == first) {
      raise(Errc::MalformedLine,
            "signature line " + std::to_string(lineno) + ": expected name: keywords",
            static_cast<std::uint64_t>(lineno));
    }
    ModelSignature sig;
    sig.name = line.substr(first, colon - first);
    while (!sig.name.empty() && sig.name.back() == ' ') sig.name.pop_back();
    std::istringstream kws(line.substr(colon + 1));
    std::string kw;
    while (std::getline(kws, kw, ',')) {
      std::size_t b = kw.find_first_not_of(" \t");
      std::size_t e = kw.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      sig.keywords.push_back(kw.substr(b, e - b + 1));
    }
    if (sig.keywords.empty()) {
      raise(Errc::MalformedLine,
            "signature line " + std::to_string(lineno) + ": no keywords",
            static_cast<std::uint64_t>(lineno));
    }
    sigs.push_back(std::move(sig));
  }
  return sigs;
}

inline std::vector<ModelSignature> load_signatures(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) raise(Errc::IoError, "cannot open signature file " + p.string());
  return parse_signatures(in);
}

namespace detail {

inline std::vector<std::size_t> find_all(std::span<const std::uint8_t> haystack,
                                         std::string_view needle) {
  std::vector<std::size_t> offsets;
  if (needle.empty() || needle.size() > haystack.size()) return offsets;
  const auto* first = haystack.data();
  const auto* last = haystack.data() + haystack.size();
  const auto* n_first = reinterpret_cast<const std::uint8_t*>(needle.data());
  const auto* n_last = n_first + needle.size();
  const auto* it = first;
  while ((it = std::search(it, last, n_first, n_last)) != last) {
    offsets.push_back(static_cast<std::size_t>(it - first));
    ++it;  // overlapping hits count
  }
  return offsets;
}

}  // namespace detail

/// Step 4.a: plain case-sensitive byte search for each signature's
/// keywords. Most total hits wins; ties break on the earliest first hit,
/// then on database order.
inline MatchReport identify_model(const ResidueDump& dump,
                                  const std::vector<ModelSignature>& signatures) {
  if (signatures.empty()) raise(Errc::InvalidArgument, "no signatures");
  MatchReport best;
  std::size_t best_hits = 0;
  std::size_t best_first = 0;
  for (const auto& sig : signatures) {
    std::vector<std::size_t> offsets;
    for (const auto& kw : sig.keywords) {
      auto hits = detail::find_all(dump.bytes, kw);
      offsets.insert(offsets.end(), hits.begin(), hits.end());
    }
    if (offsets.empty()) continue;
    std::sort(offsets.begin(), offsets.end());
    bool wins = offsets.size() > best_hits ||
                (offsets.size() == best_hits && offsets.front() < best_first);
    if (wins) {
      best_hits = offsets.size();
      best_first = offsets.front();
      best.model_name = sig.name;
      best.match_offsets = std::move(offsets);
    }
  }
  return best;
}

/// Offset of the first position followed by at least min_run consecutive
/// sentinel bytes.
inline std::size_t find_sentinel_run(std::span<const std::uint8_t> bytes,
                                     std::uint8_t sentinel_byte,
                                     std::size_t min_run) {
  if (min_run < 4) raise(Errc::InvalidArgument, "min_run must be >= 4");
  std::size_t run_start = 0;
  std::size_t run_len = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] == sentinel_byte) {
      if (run_len == 0) run_start = i;
      if (++run_len >= min_run) return run_start;
    } else {
      run_len = 0;
    }
  }
  raise(Errc::NotFound, "no run of " + std::to_string(min_run) + " x 0x" +
                            to_hex(sentinel_byte) + " bytes");
}

/// Step 4.b dry run: spawn the model with an all-0x55 image on a private
/// simulator, scrape it, and record where the sentinel landed. The record
/// holds for any victim with the same model, image length, and allocator
/// seed.
inline ProfileRecord profile_offline(const SimConfig& cfg,
                                     const std::string& model_name,
                                     std::uint64_t image_len,
                                     std::uint64_t extra_blob_len = 65536) {
  Simulator sim(cfg);

  ScenarioEvent spawn;
  spawn.kind = ScenarioEvent::Kind::Spawn;
  spawn.tag = "profiled";
  spawn.model = model_name;
  spawn.image_len = image_len;
  spawn.fill = ScenarioEvent::ImageFill::Byte;
  spawn.fill_byte = 0x55;
  spawn.extra_blob = extra_blob_len;
  ScenarioEvent term;
  term.kind = ScenarioEvent::Kind::Terminate;
  term.tag = "profiled";

  ScrapeArtifacts art = run_attack(sim, {spawn, term}, {model_name});

  ProfileRecord rec;
  rec.model_name = model_name;
  rec.sentinel = 0x55;
  rec.image_len = image_len;
  rec.allocator_seed = cfg.seed;
  rec.image_offset =
      find_sentinel_run(art.dump.bytes, rec.sentinel, image_len);
  return rec;
}

inline Bytes reconstruct_image(const ResidueDump& dump,
                               const ProfileRecord& profile) {
  if (profile.image_offset + profile.image_len > dump.bytes.size()) {
    raise(Errc::OffsetOutOfRange,
          "profile slice [" + std::to_string(profile.image_offset) + ", +" +
              std::to_string(profile.image_len) + ") beyond dump of " +
              std::to_string(dump.bytes.size()));
  }
  return Bytes(dump.bytes.begin() + static_cast<std::ptrdiff_t>(profile.image_offset),
               dump.bytes.begin() + static_cast<std::ptrdiff_t>(profile.image_offset +
                                                                profile.image_len));
}

/// Binary PPM (P6, maxval 255) for eyeballing reconstructions.
inline void export_image(std::span<const std::uint8_t> bytes, std::uint32_t width,
                         std::uint32_t height, const std::filesystem::path& path) {
  if (bytes.size() != static_cast<std::size_t>(width) * height * 3) {
    raise(Errc::DimensionMismatch,
          std::to_string(bytes.size()) + " bytes is not " + std::to_string(width) +
              "x" + std::to_string(height) + "x3");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoError, "short write to " + path.string());
}

inline void save_profile(const ProfileRecord& rec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "model_name " << rec.model_name << "\n"
      << "sentinel 0x" << to_hex(rec.sentinel) << "\n"
      << "image_offset " << rec.image_offset << "\n"
      << "image_len " << rec.image_len << "\n"
      << "allocator_seed " << rec.allocator_seed << "\n";
  if (!out) raise(Errc::IoError, "short write to " + path.string());
}

inline ProfileRecord load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());
  ProfileRecord rec;
  bool have_model = false, have_sentinel = false, have_offset = false,
       have_len = false, have_seed = false;
  std::string key, value, line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!(ls >> key >> value)) {
      raise(Errc::MalformedLine, "profile line " + std::to_string(lineno),
            static_cast<std::uint64_t>(lineno));
    }
    if (key == "model_name") {
      rec.model_name = value;
      have_model = true;
    } else if (key == "sentinel") {
      rec.sentinel = static_cast<std::uint8_t>(detail::parse_u64(value, lineno));
      have_sentinel = true;
    } else if (key == "image_offset") {
      rec.image_offset = detail::parse_u64(value, lineno);
      have_offset = true;
    } else if (key == "image_len") {
      rec.image_len = detail::parse_u64(value, lineno);
      have_len = true;
    } else if (key == "allocator_seed") {
      rec.allocator_seed = detail::parse_u64(value, lineno);
      have_seed = true;
    } else {
      raise(Errc::MalformedLine,
            "profile line " + std::to_string(lineno) + ": unknown key '" + key + "'",
            static_cast<std::uint64_t>(lineno));
    }
  }
  if (!(have_model && have_sentinel && have_offset && have_len && have_seed)) {
    raise(Errc::MalformedLine, "profile file missing required fields");
  }
  return rec;
}

}  // namespace memscrape
