#pragma once

#include <stdexcept>
#include <string>

namespace ride {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed capture, CSV, or serialized artifact.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Vector or matrix shapes that do not chain.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Preconditions on arguments (bad sizes, empty batches, out-of-range labels).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A loss became NaN or infinite while training.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(std::size_t epoch, std::size_t batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        epoch_(epoch), batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

private:
  std::size_t epoch_;
  std::size_t batch_;
};

} // namespace ride
