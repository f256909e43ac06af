#pragma once

#include <stdexcept>
#include <string>

namespace mte {

// Invalid model or run configuration. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A fit or identification step could not produce an estimate. Exit status 3.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exit status 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mte
