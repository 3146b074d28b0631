#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hdgch/types.hpp"

namespace hdgch {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
template <typename T>
void gauss_legendre(int n, DynamicVector<T>& nodes, DynamicVector<T>& weights) {
  DynamicMatrix<T> jacobi = DynamicMatrix<T>::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const T b = T(i) / std::sqrt(T(4) * i * i - 1);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<DynamicMatrix<T>> eig(jacobi);
  nodes = eig.eigenvalues();
  weights = T(2) * eig.eigenvectors().row(0).transpose().array().square();
}

/// Rule on the segment [0, 1].
struct LineRule {
  std::vector<Scalar> points;
  std::vector<Scalar> weights;
  int degree = 0;
  std::size_t size() const { return points.size(); }
};

/// Rule on the reference triangle (0,0), (1,0), (0,1).
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<Scalar> weights;
  int degree = 0;
  std::size_t size() const { return points.size(); }
};

/// Gauss-Legendre rule exact for polynomials of degree <= `degree`.
LineRule line_rule(int degree);

/// Collapsed (Duffy) tensor Gauss rule exact for total degree <= `degree`.
/// All weights are positive and sum to 1/2.
QuadratureRule triangle_rule(int degree);

/// The rule applied on the four midpoint children of the reference triangle.
QuadratureRule subdivided(const QuadratureRule& rule, int levels);

}  // namespace hdgch
