#include "cogdist/error.hpp"

namespace cogdist {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::AuthMissing: return "AuthMissing";
    case ErrorKind::RetriesExhausted: return "RetriesExhausted";
    case ErrorKind::NoJsonFound: return "NoJsonFound";
    case ErrorKind::MalformedElbJson: return "MalformedElbJson";
    case ErrorKind::MalformedInstanceJson: return "MalformedInstanceJson";
    case ErrorKind::EmptyBag: return "EmptyBag";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::BagOverflow: return "BagOverflow";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewRuns: return "TooFewRuns";
    case ErrorKind::MissingUpstream: return "MissingUpstream";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace cogdist
