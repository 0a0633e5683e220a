#pragma once

#include <stdexcept>
#include <string>

namespace rexnet {

// Base class for every error the library reports. Callers that only care
// about "did the pipeline fail" can catch this one type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CueError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class NoCounterfactual : public Error {
 public:
  using Error::Error;
};

}  // namespace rexnet
