#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace hdgch {

/// Scalar used by the solver. The dense helpers below are templated on the
/// scalar so quadrature and basis kernels can be checked in higher precision.
using Scalar = double;
using Index = Eigen::Index;

template <typename T, int Rows>
using Vector = Eigen::Matrix<T, Rows, 1>;

template <typename T>
using DynamicVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using DynamicMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Vec2 = Vector<Scalar, 2>;
using Vec = DynamicVector<Scalar>;
using Mat = DynamicMatrix<Scalar>;
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
using SpMat = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<Scalar, int>;

/// Raised on malformed input: bad mesh files, invalid parameters.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a linear or nonlinear solve cannot produce an admissible answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hdgch
