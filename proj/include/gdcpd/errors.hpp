#pragma once

#include <stdexcept>

namespace gdcpd {

// Mismatched lengths or dimensionality between arguments.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A call contract was violated (empty input, unordered timestamps, window
// larger than the series, degenerate weights, ...).
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Linear algebra broke down: Cholesky failure after jitter escalation,
// singular covariance, non-finite intermediate values.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The optimizer could not produce a usable fit from any start.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A simulated path left its guard range or turned non-finite; the message
// carries the offending step index.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Network training diverged; the message carries the epoch.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CSV or config ingestion failed; the message carries a line number or key
// path.
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed; the message names the stage and carries the
// underlying component error.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gdcpd
