#pragma once

#include <stdexcept>
#include <string>

namespace latentdyad {

// Exit codes follow the error category: 2 config, 3 data, 4 numerical.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latentdyad
