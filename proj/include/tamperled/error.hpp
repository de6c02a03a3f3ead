#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace tamperled {

// Domain error codes. The CLI prints err_name() as the first token of its
// single-line error output, so names are stable contract.
enum class Err {
  // ledger
  BadLinkage,
  BadHeight,
  BadDataHash,
  BadHeaderDigest,
  BadMetadataDigest,
  BadEncoding,
  OutOfRange,
  Io,
  // membership
  DuplicateCa,
  RoleNotAllowed,
  MalformedKey,
  BadCertificate,
  // policy / config
  ParseError,
  InvalidConfig,
  ConfigError,
  // network
  NotAMember,
  AccessDenied,
  ChaincodeNotInstalled,
  ChaincodeError,
  DivergentEndorsements,
  Replay,
  NetworkDown,
  AlreadyRunning,
  // contract domain
  UnknownDevice,
  AlreadyRegistered,
  NoReadings,
  RangeError,
  BadRequest,
  // bench / ingestion
  PreparationFailed,
  TopologyConfigError,
};

const char* err_name(Err e);

struct Error {
  Err code;
  std::string detail;

  Error(Err c, std::string d = {}) : code(c), detail(std::move(d)) {}
  std::string to_string() const;
};

// Lightweight expected-style result. Domain failures travel as values;
// exceptions are reserved for programmer errors and I/O surprises.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error err) : v_(std::move(err)) {}
  Result(Err code, std::string detail = {}) : v_(Error(code, std::move(detail))) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<T>(v_); }
  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }

  const Error& error() const { return std::get<Error>(v_); }
  Err code() const { return error().code; }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)) {}
  Result(Err code, std::string detail = {}) : err_(Error(code, std::move(detail))) {}

  bool ok() const { return !err_.has_value(); }
  explicit operator bool() const { return ok(); }

  const Error& error() const { return *err_; }
  Err code() const { return err_->code; }

 private:
  std::optional<Error> err_;
};

// Thrown from constructors and other places where a Result cannot flow.
class DomainException : public std::runtime_error {
 public:
  explicit DomainException(Error e)
      : std::runtime_error(e.to_string()), err(std::move(e)) {}
  Error err;
};

}  // namespace tamperled
