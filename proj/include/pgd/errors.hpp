#pragma once

#include <stdexcept>
#include <string>

namespace pgd {

/// Transient provider failure (timeouts, 5xx, refused connections).
/// The gateway retries these with backoff before surfacing.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The provider answered but the payload violates the expected schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No parseable gradient block in a completion.
class EmptyGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fusion completion could not be parsed into a single block.
class FusionParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset file missing, empty, or malformed. Message carries the line number.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PredictionUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every example in a probe minibatch failed to evaluate.
class RewardUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Candidate expansion produced nothing even after fallbacks.
class ExpansionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every agent failed to produce gradients this iteration.
class GradientGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical simulation diverged. Message carries the step index.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pgd
