#pragma once

#include <stdexcept>
#include <string>

namespace core {

// Invalid configuration or invalid user input. CLI maps this to exit code 1.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed dataset or log files. CLI maps this to exit code 1.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Generation backend failure after retries. CLI maps this to exit code 2.
class backend_error : public std::runtime_error {
 public:
  explicit backend_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken caller contract (mismatched lengths, empty required input).
class contract_error : public std::logic_error {
 public:
  explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace core
