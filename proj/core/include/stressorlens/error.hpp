#pragma once

#include <stdexcept>
#include <string>

namespace stressorlens {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stored artifact failed its content-hash check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the stage that produces its input.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string artifact, const std::string& what)
      : Error(what), artifact_(std::move(artifact)) {}
  const std::string& artifact() const noexcept { return artifact_; }

 private:
  std::string artifact_;
};

}  // namespace stressorlens
