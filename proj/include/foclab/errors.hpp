#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace foclab {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad parameter or malformed configuration (CLI exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Invalid value passed to an operation (non-finite input, range violation).
class DomainError : public Error {
  public:
    using Error::Error;
};

// Operation called on an object in the wrong state (e.g. unfitted normalization).
class StateError : public Error {
  public:
    using Error::Error;
};

// Plant state went non-finite during integration (CLI exit code 3).
class SimDivergedError : public Error {
  public:
    SimDivergedError(const std::string& msg, std::uint64_t step)
        : Error(msg + " at step " + std::to_string(step)), step_(step) {}
    std::uint64_t step() const { return step_; }

  private:
    std::uint64_t step_;
};

// Training loss went non-finite (CLI exit code 4).
class TrainDivergedError : public Error {
  public:
    TrainDivergedError(const std::string& msg, int epoch)
        : Error(msg + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    int epoch() const { return epoch_; }

  private:
    int epoch_;
};

}  // namespace foclab
