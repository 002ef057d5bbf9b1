#pragma once

#include <stdexcept>
#include <string>

namespace flm {

// Base of everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A violated precondition, shape rule, configuration constraint or artifact
// contract. The CLI maps these to exit status 1.
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A bias was requested for a year whose preceding window is not covered by the
// available history and the zero-bias fallback is disabled.
class HistoryError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Unreadable or unwritable files. The CLI maps these to exit status 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flm
