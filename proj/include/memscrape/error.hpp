#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace memscrape {

enum class Errc {
  OutOfRange,
  Unaligned,
  PfnOverflow,
  MalformedLine,
  NoHeap,
  AmbiguousHeap,
  NotPresent,
  Swapped,
  OutOfMemory,
  NoSuchPid,
  AlreadyTerminated,
  TerminatedPid,
  NotFound,
  StillRunning,
  IncompleteTranslation,
  OffsetOutOfRange,
  DimensionMismatch,
  LengthMismatch,
  ForeignFrame,
  PermissionDenied,
  InvalidArgument,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::Unaligned: return "Unaligned";
    case Errc::PfnOverflow: return "PfnOverflow";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::NoHeap: return "NoHeap";
    case Errc::AmbiguousHeap: return "AmbiguousHeap";
    case Errc::NotPresent: return "NotPresent";
    case Errc::Swapped: return "Swapped";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::NoSuchPid: return "NoSuchPid";
    case Errc::AlreadyTerminated: return "AlreadyTerminated";
    case Errc::TerminatedPid: return "TerminatedPid";
    case Errc::NotFound: return "NotFound";
    case Errc::StillRunning: return "StillRunning";
    case Errc::IncompleteTranslation: return "IncompleteTranslation";
    case Errc::OffsetOutOfRange: return "OffsetOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ForeignFrame: return "ForeignFrame";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Library-wide exception. `detail` carries an error-specific value:
/// byte position for MalformedLine, the offending vpn for
/// IncompleteTranslation, zero otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::uint64_t detail = 0)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  std::uint64_t detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::uint64_t detail_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what,
                               std::uint64_t detail = 0) {
  throw Error(code, what, detail);
}

}  // namespace memscrape
