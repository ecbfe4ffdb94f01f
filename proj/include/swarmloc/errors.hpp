#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace swarmloc {

// Input that violates a documented contract (bad config, inconsistent
// dataset, missing table entry). Maps to CLI exit code 1.
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public validation_error {
 public:
  parse_error(const std::string& source, std::size_t line, const std::string& what)
      : validation_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace swarmloc
