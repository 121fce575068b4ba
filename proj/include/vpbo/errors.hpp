#pragma once

#include <stdexcept>
#include <string>

namespace vpbo {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths or spaces that do not line up.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Cholesky failure and other linear-algebra breakdowns.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Combination count above the configured cap.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Input outside a benchmark function's legal domain.
class DomainError : public Error {
public:
  using Error::Error;
};

/// The black-box objective failed to produce a value.
class EvaluationError : public Error {
public:
  using Error::Error;
};

/// The external objective process broke the wire protocol.
class ProtocolError : public EvaluationError {
public:
  using EvaluationError::EvaluationError;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class AggregationError : public Error {
public:
  using Error::Error;
};

/// File-system failure; the message names the path.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace vpbo
