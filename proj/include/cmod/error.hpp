#pragma once

#include <stdexcept>
#include <string>

namespace cmod {

// Error taxonomy mirrors the CLI exit codes: Domain -> 1, Io/Parse -> 2.
enum class ErrorKind { Domain, Io, Parse };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_domain(const std::string& message) {
  throw Error(ErrorKind::Domain, message);
}

[[noreturn]] inline void fail_io(const std::string& message) {
  throw Error(ErrorKind::Io, message);
}

[[noreturn]] inline void fail_parse(const std::string& message) {
  throw Error(ErrorKind::Parse, message);
}

inline void require_domain(bool ok, const std::string& message) {
  if (!ok) fail_domain(message);
}

}  // namespace cmod
