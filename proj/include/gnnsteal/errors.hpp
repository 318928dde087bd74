#pragma once

#include <stdexcept>
#include <string>

namespace gnnsteal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input artifacts (bundles, model dirs, configs on disk).
struct IngestError : Error {
  using Error::Error;
};

/// Violated preconditions or invariants on in-memory data.
struct ValidationError : Error {
  using Error::Error;
};

/// Oracle query budget exhausted; no data is returned.
struct BudgetError : Error {
  using Error::Error;
};

/// spectral_augment could not reach a positive optimal-pair margin.
struct AugmentError : Error {
  AugmentError(const std::string& msg, double margin)
      : Error(msg), best_margin(margin) {}
  double best_margin;
};

/// Config schema violations; message lists every violation at once.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace gnnsteal
