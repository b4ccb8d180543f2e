#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shmm {

/// Base class for all library errors.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A value violates a type invariant or an operation precondition.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

/// Observation was NaN or infinite.
class RejectedInput : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

class InvalidBudget : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

class InvalidHorizon : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

/// GP inputs must be strictly increasing.
class OrderingError : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

/// Linear algebra breakdown (e.g. Cholesky failed after maximal jitter).
class NumericalError : public Error
{
public:
  using Error::Error;
};

/// Every candidate had zero likelihood at time `t`.
class DegenerateLikelihood : public NumericalError
{
public:
  DegenerateLikelihood(std::size_t t, std::string const &what)
    : NumericalError(what), time_index(t)
  {
  }
  std::size_t time_index;
};

/// Enumeration or combinatorial cap exceeded.
class InstanceTooLarge : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

} // namespace shmm
