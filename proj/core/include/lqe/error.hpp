#pragma once

#include <stdexcept>
#include <string>

namespace lqe {

/// Raised when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an object is used in a state that no longer matches its inputs
/// (for example a forward cache replayed after the parameters changed).
class InvalidState : public std::logic_error {
 public:
  explicit InvalidState(const std::string& what) : std::logic_error(what) {}
};

/// I/O failures: unreadable images, unwritable output directories, corrupt checkpoints.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lqe
