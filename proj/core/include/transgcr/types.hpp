#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace transgcr {

// Dense storage is column-major so that feature columns are contiguous; the
// coordinate-descent solver and propagation both walk columns.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Label visibility: mask[i] == true means node i's label enters the likelihood.
using Mask = std::vector<bool>;

// Thrown for inputs that violate an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a computation cannot produce a result (undefined scaling,
// degenerate label sets, failures inside multi-step estimators).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::size_t count_visible(const Mask& mask) {
  std::size_t k = 0;
  for (bool b : mask) k += b ? 1 : 0;
  return k;
}

inline std::vector<std::size_t> visible_indices(const Mask& mask) {
  std::vector<std::size_t> out;
  out.reserve(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

}  // namespace transgcr
