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

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpplearn/numerics.hpp"
#include "dpplearn/parallel.hpp"

namespace dpplearn {

/// A subset of the ground set {0..N-1}, stored as strictly increasing
/// indices. Items are 0-based internally; file formats are 1-based and
/// convert at the I/O boundary.
class Subset {
 public:
  Subset() = default;

  explicit Subset(std::vector<int> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i] < 0) throw std::invalid_argument("Subset: negative item index");
      if (i > 0 && items_[i] == items_[i - 1]) {
        throw std::invalid_argument("Subset: duplicate item " + std::to_string(items_[i]));
      }
    }
  }

  const std::vector<int>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }

  bool contains(int item) const {
    return std::binary_search(items_.begin(), items_.end(), item);
  }

  /// Throws unless every index lies in [0, ground_size).
  void check_ground(int ground_size) const {
    if (!items_.empty() && items_.back() >= ground_size) {
      throw std::invalid_argument("Subset: item " + std::to_string(items_.back()) +
                                  " outside ground set of size " + std::to_string(ground_size));
    }
  }

  bool operator==(const Subset& other) const { return items_ == other.items_; }

 private:
  std::vector<int> items_;
};

/// Marginal kernel K stored spectrally as orthonormal eigenvectors V and
/// eigenvalues in [0,1]. The dense matrix V diag(lambda) V^T is materialized
/// once at construction; instances are immutable and safe to share across
/// threads.
class SpectralKernel {
 public:
  SpectralKernel(Matrix eigenvectors, Vector eigenvalues)
      : v_(std::move(eigenvectors)), lam_(std::move(eigenvalues)) {
    const Eigen::Index n = v_.rows();
    if (n < 1 || v_.cols() != n || lam_.size() != n) {
      throw std::invalid_argument("SpectralKernel: inconsistent dimensions");
    }
    if (!v_.allFinite() || !lam_.allFinite()) {
      throw std::invalid_argument("SpectralKernel: non-finite entries");
    }
    const double ortho_err = (v_.transpose() * v_ - Matrix::Identity(n, n)).norm();
    if (ortho_err > 1e-8) {
      throw std::invalid_argument("SpectralKernel: eigenvectors not orthonormal (error " +
                                  std::to_string(ortho_err) + ")");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (lam_(j) < -1e-10 || lam_(j) > 1.0 + 1e-10) {
        throw std::invalid_argument("SpectralKernel: eigenvalue " + std::to_string(lam_(j)) +
                                    " outside [0,1]");
      }
      lam_(j) = std::min(1.0, std::max(0.0, lam_(j)));
    }
    dense_ = v_ * lam_.asDiagonal() * v_.transpose();
    dense_ = 0.5 * (dense_ + dense_.transpose()).eval();
  }

  int size() const { return static_cast<int>(v_.rows()); }
  const Matrix& eigenvectors() const { return v_; }
  const Vector& eigenvalues() const { return lam_; }
  const Matrix& dense() const { return dense_; }

 private:
  Matrix v_;
  Vector lam_;
  Matrix dense_;
};

/// Non-marginal kernel L (PSD). The eigendecomposition is cached at
/// construction; eigenvalues below zero by round-off are clamped to zero in
/// the cached copy while the raw matrix is kept as given.
class LKernel {
 public:
  explicit LKernel(SymmetricMatrix matrix) : m_(std::move(matrix)), eig_(sym_eigendecompose(m_)) {
    const double min_eig = eig_.values(eig_.values.size() - 1);
    if (min_eig < -1e-10) {
      throw std::invalid_argument("LKernel: matrix is not PSD (eigenvalue " +
                                  std::to_string(min_eig) + ")");
    }
    for (Eigen::Index j = 0; j < eig_.values.size(); ++j) {
      eig_.values(j) = std::max(0.0, eig_.values(j));
    }
  }

  int size() const { return static_cast<int>(m_.size()); }
  const SymmetricMatrix& matrix() const { return m_; }
  const EigenPair& eigen() const { return eig_; }

 private:
  SymmetricMatrix m_;
  EigenPair eig_;
};

/// Marginal kernel of an L-ensemble: eigenvectors are shared and each
/// eigenvalue mu of L maps to mu / (1 + mu) in [0, 1).
inline SpectralKernel marginal_from_l(const LKernel& l) {
  const Vector& mu = l.eigen().values;
  if (mu(mu.size() - 1) < -1e-8) {
    throw std::invalid_argument("marginal_from_l: L is not PSD");
  }
  Vector lam(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    lam(j) = std::min(1.0, std::max(0.0, mu(j) / (1.0 + mu(j))));
  }
  return SpectralKernel(l.eigen().vectors, lam);
}

/// Inverse map: eigenvalue lambda of K becomes lambda / (1 - lambda) of L.
/// Eigenvalues at unity have no finite L and raise an error.
inline LKernel l_from_marginal(const SpectralKernel& k) {
  const Vector& lam = k.eigenvalues();
  Vector mu(lam.size());
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam(j) >= 1.0 - 1e-12) {
      throw std::domain_error("l_from_marginal: eigenvalue at unity (lambda = " +
                              std::to_string(lam(j)) + ")");
    }
    mu(j) = lam(j) / (1.0 - lam(j));
  }
  const Matrix l = k.eigenvectors() * mu.asDiagonal() * k.eigenvectors().transpose();
  return LKernel(SymmetricMatrix::from_dense(l));
}

/// Exact set log-probability from a dense marginal kernel: log|det(K - I_Ybar)|
/// where I_Ybar is the identity with the diagonal zeroed on items of Y.
/// Returns -inf for probability-zero sets (singular determinant).
inline double set_log_likelihood(const Matrix& k_dense, const Subset& y) {
  const Eigen::Index n = k_dense.rows();
  if (k_dense.cols() != n) throw std::invalid_argument("set_log_likelihood: kernel must be square");
  if (!y.empty() && y.items().back() >= n) {
    throw std::invalid_argument("set_log_likelihood: subset outside ground set");
  }
  Matrix a = k_dense;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!y.contains(static_cast<int>(i))) a(i, i) -= 1.0;
  }
  const LogDetResult r = log_abs_det(a);
  return r.singular ? kNegInf : r.value;
}

inline double set_log_likelihood(const SpectralKernel& k, const Subset& y) {
  return set_log_likelihood(k.dense(), y);
}

/// Inclusion marginal P(A subset of Y) = det(K_A). The empty set yields 1.
/// Round-off excursions are clamped back into [0, 1].
inline double inclusion_marginal(const SpectralKernel& k, const Subset& a) {
  a.check_ground(k.size());
  const int m = a.size();
  if (m == 0) return 1.0;
  Matrix minor(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      minor(i, j) = k.dense()(a.items()[i], a.items()[j]);
    }
  }
  const double det = minor.partialPivLu().determinant();
  return std::min(1.0, std::max(0.0, det));
}

/// Sum of set log-likelihoods over a collection of examples; -inf when any
/// example has probability zero. Per-example terms are reduced over fixed
/// chunks in a fixed order, so the value does not depend on thread count.
inline double dataset_log_likelihood(const SpectralKernel& k, std::span<const Subset> examples,
                                     int threads = 1) {
  return chunked_reduce<double>(
      examples.size(), threads, 0.0,
      [&](std::size_t begin, std::size_t end) {
        double partial = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
          const double ll = set_log_likelihood(k, examples[i]);
          if (ll == kNegInf) return kNegInf;
          partial += ll;
        }
        return partial;
      },
      [](double acc, double partial) { return acc + partial; });
}

/// log det(L + I) computed spectrally as sum_j log(1 / (1 - lambda_j)).
inline double normalizer_log(const SpectralKernel& k) {
  const Vector& lam = k.eigenvalues();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam(j) >= 1.0 - 1e-12) {
      throw std::domain_error("normalizer_log: eigenvalue at unity");
    }
    sum -= std::log1p(-lam(j));
  }
  return sum;
}

}  // namespace dpplearn
