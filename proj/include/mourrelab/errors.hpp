#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mourrelab {

// Bad argument to a builder or check (axis out of range, interval outside
// (-2, 2), mismatched boxes, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operator requested on a box geometry where it is not defined, e.g. a
// position operator on a periodic box.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Problem size exceeds a configured limit (dense cap, annulus outside box,
// torus dimension).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative kernel failed to converge. Carries the last estimate and iterate.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double last_estimate, Eigen::VectorXd last_iterate)
      : std::runtime_error(what), last_estimate_(last_estimate), last_iterate_(std::move(last_iterate)) {}

  double last_estimate() const { return last_estimate_; }
  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

 private:
  double last_estimate_;
  Eigen::VectorXd last_iterate_;
};

// A Weyl vector could not be placed inside a plateau.
class PlacementError : public std::runtime_error {
 public:
  PlacementError(const std::string& what, int max_feasible_window)
      : std::runtime_error(what), max_feasible_window_(max_feasible_window) {}
  int max_feasible_window() const { return max_feasible_window_; }

 private:
  int max_feasible_window_;
};

// Violated precondition of a numerical check (not an argument typo).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Itemized config validation failure; each item names the key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> items);
  const std::vector<std::string>& items() const { return items_; }

 private:
  std::vector<std::string> items_;
};

}  // namespace mourrelab
