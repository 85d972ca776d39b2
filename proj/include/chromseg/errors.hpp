#pragma once

#include <stdexcept>
#include <string>

namespace chromseg {

// Shape/index/channel contract violated by the caller.
class StructuralError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values reached a kernel.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public NumericalError {
public:
  DivergenceError(int epoch, int batch, const std::string& what)
      : NumericalError(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

private:
  int epoch_;
  int batch_;
};

// Malformed file contents (bad magic, truncation, out-of-range payload).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Configuration values that cannot produce a valid run.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace chromseg
