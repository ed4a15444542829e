// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace dpplearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Dense symmetric matrix with storage-enforced symmetry: entries(i,j) and
/// entries(j,i) are always bit-identical. Mutation writes both triangles;
/// construction from an arbitrary dense matrix averages them.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Eigen::Index n) : m_(Matrix::Zero(n, n)) {
    if (n < 1) throw std::invalid_argument("SymmetricMatrix: dimension must be >= 1");
  }

  /// Builds from a dense square matrix, symmetrizing as 0.5*(M + M^T).
  /// IEEE addition is commutative, so the stored halves match exactly.
  static SymmetricMatrix from_dense(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("SymmetricMatrix: matrix must be square");
    }
    if (m.rows() < 1) throw std::invalid_argument("SymmetricMatrix: dimension must be >= 1");
    if (!m.allFinite()) throw std::invalid_argument("SymmetricMatrix: non-finite entries");
    SymmetricMatrix s(m.rows());
    s.m_ = 0.5 * (m + m.transpose());
    return s;
  }

  Eigen::Index size() const { return m_.rows(); }

  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  void set(Eigen::Index i, Eigen::Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Matrix& mat() const { return m_; }

 private:
  Matrix m_;
};

/// Orthonormal eigenvectors (columns) with eigenvalues sorted descending.
struct EigenPair {
  Matrix vectors;
  Vector values;
};

/// Eigendecomposition of a symmetric matrix. Eigenvalues are returned in
/// descending order with the eigenvector columns permuted to match.
inline EigenPair sym_eigendecompose(const SymmetricMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s.mat());
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("sym_eigendecompose: solver failed to converge");
  }
  EigenPair out;
  // SelfAdjointEigenSolver sorts ascending; flip to descending.
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  const Eigen::Index n = s.size();
  const double ortho_err = (out.vectors.transpose() * out.vectors - Matrix::Identity(n, n)).norm();
  if (ortho_err > 1e-10) {
    throw std::runtime_error("sym_eigendecompose: eigenvector basis lost orthonormality");
  }
  return out;
}

/// Matrix exponential of a skew-symmetric matrix via scaling-and-squaring:
/// the argument is halved until its Frobenius norm is <= 0.5, the power
/// series is summed to a relative term below 1e-16, and the result is
/// squared back up. Skew input keeps the output orthogonal.
inline Matrix skew_matrix_exponential(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("skew_matrix_exponential: matrix must be square");
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("skew_matrix_exponential: non-finite entries");
  }
  if ((a + a.transpose()).norm() > 1e-10) {
    throw std::invalid_argument("skew_matrix_exponential: matrix is not skew-symmetric");
  }
  const Eigen::Index n = a.rows();
  const double norm = a.norm();
  int squarings = 0;
  double scaled = norm;
  while (scaled > 0.5) {
    scaled *= 0.5;
    ++squarings;
  }
  const Matrix b = a / std::ldexp(1.0, squarings);
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 64; ++k) {
    term = (term * b) / static_cast<double>(k);
    result += term;
    if (term.norm() <= 1e-16 * result.norm()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Prefix table of elementary symmetric polynomials: entry (l, i) holds
/// e_l over the first i values. Runs in O(n*k) (the summation algorithm).
inline Matrix elementary_symmetric_table(const Vector& values, int k) {
  if (k < 0) throw std::invalid_argument("elementary_symmetric_table: negative order");
  const Eigen::Index n = values.size();
  Matrix table = Matrix::Zero(k + 1, n + 1);
  table.row(0).setOnes();
  for (int l = 1; l <= k; ++l) {
    for (Eigen::Index i = 1; i <= n; ++i) {
      table(l, i) = table(l, i - 1) + values(i - 1) * table(l - 1, i - 1);
    }
  }
  return table;
}

/// k-th elementary symmetric polynomial of the given values.
/// e_0 = 1 by the empty-product convention; k > n yields 0 (empty sum).
inline double elementary_symmetric(const Vector& values, int k) {
  if (k < 0) throw std::invalid_argument("elementary_symmetric: negative order");
  if (k == 0) return 1.0;
  if (k > values.size()) return 0.0;
  const Matrix table = elementary_symmetric_table(values, k);
  return table(k, values.size());
}

struct LogDetResult {
  double value;
  bool singular;
};

/// log|det(S)| via LU with partial pivoting. A pivot with magnitude below
/// 1e-300 scaled by the dimension marks the matrix singular; singularity is
/// reported as a state, not an error, with value -inf.
inline LogDetResult log_abs_det(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("log_abs_det: matrix must be square");
  }
  if (!s.allFinite()) throw std::invalid_argument("log_abs_det: non-finite entries");
  const Eigen::Index n = s.rows();
  if (n == 0) return {0.0, false};
  Eigen::PartialPivLU<Matrix> lu(s);
  const double threshold = 1e-300 * static_cast<double>(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = std::abs(lu.matrixLU()(i, i));
    if (!(pivot >= threshold)) return {kNegInf, true};
    sum += std::log(pivot);
  }
  return {sum, false};
}

}  // namespace dpplearn
