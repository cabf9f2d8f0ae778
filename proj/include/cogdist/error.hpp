#pragma once

#include <stdexcept>
#include <string>

namespace cogdist {

/// Every failure raised by the library carries one of these kinds so that
/// callers (and the CLI exit-code mapping) can branch without string matching.
enum class ErrorKind {
  // schema-core
  UnknownLabel,
  EmptyDataset,
  InvalidInput,
  // llm-gateway
  Transport,
  Timeout,
  AuthMissing,
  RetriesExhausted,
  NoJsonFound,
  // prompt-pipeline
  MalformedElbJson,
  MalformedInstanceJson,
  // bag-builder
  EmptyBag,
  // embedding-provider
  MissingEmbedding,
  DimensionMismatch,
  BagOverflow,
  // mil-net
  ShapeMismatch,
  NonFiniteActivation,
  DivergedLoss,
  // eval-metrics
  LengthMismatch,
  TooFewRuns,
  // experiment-cli
  MissingUpstream,
  ConfigInvalid,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Transport failures keep the HTTP status (0 when no response was received).
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& message)
      : Error(ErrorKind::Transport, "status " + std::to_string(status) + ": " + message),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace cogdist
