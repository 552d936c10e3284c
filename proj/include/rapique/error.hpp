#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rapique {

// Every error raised by the library carries one of these classes. The CLI
// maps each class to a stable exit code (see exit_code()).
enum class ErrorKind {
  usage,          // bad command-line or API arguments
  io,             // file missing / unreadable / unwritable
  parse,          // malformed file header or body
  truncated,      // payload ends before the declared frame / record
  unsupported,    // valid but unsupported format variant
  geometry,       // size / shape mismatch
  alignment,      // sidecar does not line up with the chunk schedule
  data,           // non-finite or out-of-range values
  precondition,   // input too small / too short for the operation
  degenerate,     // statistic undefined for the given input
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::data: return "data";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "unknown";
}

// Process exit codes. 0 is success and 1 is reserved for unexpected failures.
constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::parse: return 4;
    case ErrorKind::truncated: return 5;
    case ErrorKind::unsupported: return 6;
    case ErrorKind::geometry: return 7;
    case ErrorKind::alignment: return 8;
    case ErrorKind::data: return 9;
    case ErrorKind::precondition: return 10;
    case ErrorKind::degenerate: return 11;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace rapique
