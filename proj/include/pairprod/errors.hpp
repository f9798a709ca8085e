#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pairprod {

/// Invalid user-supplied parameters or violated preconditions. Maps to exit code 2.
class ConfigError : public std::invalid_argument
{
  public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key))
    {
    }

    const std::string& key() const noexcept { return key_; }

  private:
    std::string key_;
};

/// A solver produced an unusable result (unitarity drift, norm loss, ...). Maps to exit code 1.
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// The momentum grid does not contain the spectral support.
class GridError : public NumericalError
{
  public:
    using NumericalError::NumericalError;
};

/// Failure while propagating one initial state of the spatial solver.
class StateFailure : public NumericalError
{
  public:
    StateFailure(std::size_t index, const std::string& what)
        : NumericalError("state " + std::to_string(index) + ": " + what), index_(index)
    {
    }

    std::size_t index() const noexcept { return index_; }

  private:
    std::size_t index_;
};

} // namespace pairprod
