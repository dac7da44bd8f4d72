#pragma once

#include <stdexcept>
#include <string>

namespace sevmil {

// Error identities surfaced by the CLI as machine-readable codes. File
// format problems keep distinct codes per failure mode but share one exit
// status category.
enum class ErrorCode {
  kInvalidConfig,
  kFileFormat,
  kMagicMismatch,
  kTruncatedFile,
  kUnsupportedVersion,
  kManifestMismatch,
  kPrecondition,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  const char* code_name() const noexcept {
    switch (code_) {
      case ErrorCode::kInvalidConfig: return "invalid_config";
      case ErrorCode::kFileFormat: return "file_format";
      case ErrorCode::kMagicMismatch: return "bag_magic_mismatch";
      case ErrorCode::kTruncatedFile: return "bag_truncated";
      case ErrorCode::kUnsupportedVersion: return "bag_version_unsupported";
      case ErrorCode::kManifestMismatch: return "manifest_mismatch";
      case ErrorCode::kPrecondition: return "precondition";
      case ErrorCode::kInternal: return "internal";
    }
    return "internal";
  }

  int exit_status() const noexcept {
    switch (code_) {
      case ErrorCode::kInvalidConfig:
        return 2;
      case ErrorCode::kFileFormat:
      case ErrorCode::kMagicMismatch:
      case ErrorCode::kTruncatedFile:
      case ErrorCode::kUnsupportedVersion:
      case ErrorCode::kManifestMismatch:
        return 3;
      case ErrorCode::kPrecondition:
        return 4;
      case ErrorCode::kInternal:
        return 1;
    }
    return 1;
  }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace sevmil
