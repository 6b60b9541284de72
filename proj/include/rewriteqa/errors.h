#ifndef REWRITEQA_ERRORS_H_
#define REWRITEQA_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rewriteqa {

// Root of every error the library raises. Callers that only want to report
// and exit can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON line, fixture table row, config file).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  // 1-based; 0 when the error has no line context.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed JSON that is missing a required field or has a wrong type.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Failure inside (or in the reply of) a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& token)
      : Error("token outside rewriter vocabulary: '" + token + "'"),
        token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConfigMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NoCandidatesError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace rewriteqa

#endif  // REWRITEQA_ERRORS_H_
