#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace vcplm {

/// Broad failure categories; the CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_input,
  numerical,
  simulation_instability,
};

/// Base class for every error raised by the library.
///
/// A pipeline stage label can be attached while the exception unwinds
/// through fit_pipeline, so callers can tell which step failed.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::numerical)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) {
    if (stage_.empty()) stage_ = std::move(stage);
  }

 private:
  ErrorKind kind_;
  std::string stage_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what, ErrorKind::invalid_input) {}
};

class InvalidBandwidth : public Error {
 public:
  explicit InvalidBandwidth(double h)
      : Error("invalid bandwidth " + std::to_string(h) + " (must be positive and finite)",
              ErrorKind::invalid_input),
        bandwidth_(h) {}
  double bandwidth() const noexcept { return bandwidth_; }

 private:
  double bandwidth_;
};

/// A local or global weighted design whose normal matrix is (numerically) singular.
class SingularDesign : public Error {
 public:
  SingularDesign(const std::string& what, double condition,
                 std::optional<double> location = std::nullopt)
      : Error(what), condition_(condition), location_(location) {}

  /// Condition estimate of the normal matrix (infinity when it has a zero eigenvalue).
  double condition() const noexcept { return condition_; }
  /// Evaluation point of the local fit, when the design was local.
  std::optional<double> location() const noexcept { return location_; }

 private:
  double condition_;
  std::optional<double> location_;
};

class CollinearCovariates : public Error {
 public:
  explicit CollinearCovariates(const std::string& what) : Error(what) {}
};

class InvalidHypothesis : public Error {
 public:
  explicit InvalidHypothesis(const std::string& what) : Error(what, ErrorKind::invalid_input) {}
};

class DegenerateSample : public Error {
 public:
  explicit DegenerateSample(const std::string& what) : Error(what, ErrorKind::invalid_input) {}
};

class DegenerateCovariance : public Error {
 public:
  explicit DegenerateCovariance(const std::string& what) : Error(what) {}
};

class BandwidthSelectionError : public Error {
 public:
  explicit BandwidthSelectionError(const std::string& what) : Error(what) {}
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double tolerance)
      : Error(what), tolerance_(tolerance) {}
  double tolerance() const noexcept { return tolerance_; }

 private:
  double tolerance_;
};

/// Too many Monte Carlo or bootstrap replicates failed.
class SimulationInstability : public Error {
 public:
  explicit SimulationInstability(const std::string& what)
      : Error(what, ErrorKind::simulation_instability) {}
};

}  // namespace vcplm
