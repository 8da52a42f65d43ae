#pragma once

#include <stdexcept>
#include <string>

namespace poolgt {

// Every error carries a stable machine-readable code; the HTTP layer and the
// CLI surface it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define POOLGT_DEFINE_ERROR(Name, Code)                           \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message) : Error(Code, message) {} \
  };

POOLGT_DEFINE_ERROR(InvalidStrategy, "INVALID_STRATEGY")
POOLGT_DEFINE_ERROR(DomainError, "DOMAIN_ERROR")
POOLGT_DEFINE_ERROR(AnalysisError, "ANALYSIS_ERROR")
POOLGT_DEFINE_ERROR(BracketError, "BRACKET_ERROR")
POOLGT_DEFINE_ERROR(ValidationError, "VALIDATION_ERROR")
POOLGT_DEFINE_ERROR(SequencingError, "SEQUENCING_ERROR")
POOLGT_DEFINE_ERROR(SessionCompleteError, "SESSION_COMPLETE")
POOLGT_DEFINE_ERROR(NotFound, "NOT_FOUND")

#undef POOLGT_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& location, const std::string& message)
      : Error("PARSE_ERROR", location + ": " + message), location_(location) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class PersistError : public Error {
 public:
  PersistError(std::size_t offset, const std::string& message)
      : Error("PERSIST_ERROR", "record " + std::to_string(offset) + ": " + message),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace poolgt
