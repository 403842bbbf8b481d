#pragma once

#include <stdexcept>
#include <string>

namespace morpho {

// One exception type per failure domain; the CLI maps each to a stable exit code.

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ForestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PathLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Endpoint resolved to OPEN terrain; no site-general scenario applies.
class NoCoverageError : public PathLossError {
 public:
  using PathLossError::PathLossError;
};

class RangeError : public PathLossError {
 public:
  using PathLossError::PathLossError;
};

class OutOfMapError : public PathLossError {
 public:
  using PathLossError::PathLossError;
};

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace morpho
