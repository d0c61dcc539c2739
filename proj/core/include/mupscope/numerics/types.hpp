#pragma once

#include <Eigen/Core>

#include <functional>
#include <stdexcept>

namespace mupscope {

using Vector = Eigen::VectorXd;
// Row-major so that flattened weight slices map onto matrices without copies.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Matrix-free linear map on R^n.
using LinearOperator = std::function<Vector(const Vector&)>;

/// Thrown when an iterate or a loss leaves the finite range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mupscope
