#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pdgsbr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or kernel parameter is outside its admissible domain.
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

/// Categorical weights are all zero, negative, or NaN.
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// A sampler was handed a state it cannot move from (e.g. -inf log density).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Simulated trajectory left the finite range. `index` is zero-based over the
/// concatenated observations and held-out futures of the series.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t series, std::size_t index, const std::string& what)
      : Error(what), series_(series), index_(index) {}
  std::size_t series() const { return series_; }
  std::size_t index() const { return index_; }

 private:
  std::size_t series_;
  std::size_t index_;
};

/// The control-parameter precision matrix of a series is numerically singular.
class SingularDesignError : public Error {
 public:
  SingularDesignError(std::size_t series, const std::string& what)
      : Error(what), series_(series) {}
  std::size_t series() const { return series_; }

 private:
  std::size_t series_;
};

/// A Gibbs kernel failed; carries the sweep index it failed in.
class KernelError : public Error {
 public:
  KernelError(std::uint64_t iteration, const std::string& what)
      : Error(what), iteration_(iteration) {}
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

class TruthUnavailableError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Files that parse but disagree in shape (e.g. trace m != data m).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// File system failures (CLI exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdgsbr
