// Error types shared by the whole library. Every failure carries a coarse
// category so the CLI can map it onto a stable exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace recon {

enum class ErrorCategory {
  kConfig,   // malformed configuration / spec values
  kIo,       // missing or unreadable files, parse failures
  kNumeric,  // degenerate or under-constrained numerical problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::kConfig, m) {}
};
struct InvalidSpec : Error {
  explicit InvalidSpec(const std::string& m) : Error(ErrorCategory::kConfig, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::kIo, m) {}
};
struct ParseError : Error {
  ParseError(const std::string& file, int line, const std::string& m)
      : Error(ErrorCategory::kIo, file + ":" + std::to_string(line) + ": " + m),
        line_number(line) {}
  int line_number;
};
struct MissingNormals : Error {
  explicit MissingNormals(const std::string& m) : Error(ErrorCategory::kIo, m) {}
};
struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};
struct InsufficientCorrespondences : Error {
  explicit InsufficientCorrespondences(const std::string& m)
      : Error(ErrorCategory::kNumeric, m) {}
};
struct NotConnected : Error {
  explicit NotConnected(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};
struct SingularSystem : Error {
  explicit SingularSystem(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};
struct NoPlanes : Error {
  explicit NoPlanes(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};
struct EmptyCloud : Error {
  explicit EmptyCloud(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};
struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& m) : Error(ErrorCategory::kNumeric, m) {}
};

}  // namespace recon
