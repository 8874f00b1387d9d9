#pragma once

#include <stdexcept>
#include <string>

namespace amde {

enum class ErrorKind {
  Dimension,    // operand shapes incompatible
  Axis,         // reduction axis out of range or duplicated
  Contract,     // precondition violated (non-scalar loss, bad probability vector, ...)
  Determinism,  // repeated evaluation of a supposedly pure function disagreed
  Sampling,     // batch construction cannot satisfy anchor/positive/negative requirements
  Protocol,     // evaluation protocol violated (query without relevant gallery item)
  Config,       // invalid or inconsistent configuration
  Io,           // file system failure
  Format,       // malformed file (bad magic, bad json)
  Version,      // checkpoint format version mismatch
  Truncated,    // file ends before the declared payload
  Checksum,     // CRC mismatch
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Axis: return "axis";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Determinism: return "determinism";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Version: return "version";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Checksum: return "checksum";
  }
  return "unknown";
}

}  // namespace amde
