#pragma once

#include <stdexcept>
#include <string>

namespace fgd {

/// Invalid user-supplied configuration or argument (bad dimension, bad key).
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// A theoretical result was requested for constants that violate its assumptions.
class InadmissibleError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: non-finite iterate or a failed decomposition.
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// The optimizer produced a non-finite iterate.
class DivergenceError : public NumericalError
{
  public:
    using NumericalError::NumericalError;
};

}  // namespace fgd
