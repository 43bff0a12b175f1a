#pragma once

#include <stdexcept>
#include <string>

namespace gridrl {

// Bad configuration value or inconsistent dimensions. Carries the field name
// so the CLI can emit a machine-parsable diagnostic.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed demonstration or trajectory data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calling an operation whose preconditions are violated (e.g. stepping a
// finished episode).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Expert planner could not solve the scenario within the step budget. The
// caller resamples another seed.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A reward group with all-equal outcomes reached advantage computation.
class DegenerateGroupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dynamic sampling could not assemble a full mixed-outcome batch within the
// resample budget. This is the zero-capability failure regime: the policy
// produces no learning signal, so the iteration performs no update.
class ZeroSignalError : public std::runtime_error {
 public:
  ZeroSignalError(int all_success, int all_fail, int accepted,
                  const std::string& message)
      : std::runtime_error(message),
        all_success_(all_success),
        all_fail_(all_fail),
        accepted_(accepted) {}

  int all_success_groups() const { return all_success_; }
  int all_fail_groups() const { return all_fail_; }
  int accepted_groups() const { return accepted_; }

 private:
  int all_success_;
  int all_fail_;
  int accepted_;
};

}  // namespace gridrl
