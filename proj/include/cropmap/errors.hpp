#pragma once

#include <stdexcept>
#include <string>

namespace cropmap {

// Input/schema violations (bad file contents, bad config). CLI exit code 2.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Violated operation preconditions (domain/range errors). CLI exit code 3.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem and serialization failures. CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cropmap
