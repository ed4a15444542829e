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
#include <stdexcept>
#include <string>
#include <vector>

#include "dpplearn/kernel.hpp"
#include "dpplearn/rng.hpp"

namespace dpplearn {

/// Indices of the eigenvector columns selected for an elementary DPP
/// (the hidden mixture component behind a two-phase sample).
struct ElementaryIndexSet {
  std::vector<int> indices;
  int size() const { return static_cast<int>(indices.size()); }
};

/// Phase 1 of DPP sampling: include eigenvector j independently with
/// probability lambda_j.
inline ElementaryIndexSet sample_mixture_component(const SpectralKernel& k, RngStream& rng) {
  ElementaryIndexSet j;
  for (int i = 0; i < k.size(); ++i) {
    if (rng.uniform() < k.eigenvalues()(i)) j.indices.push_back(i);
  }
  return j;
}

/// Phase 1 of k-DPP sampling: choose exactly k eigenvector indices with
/// probability proportional to the product of their eigenvalues, using the
/// backward recursion over the elementary-symmetric prefix table.
inline ElementaryIndexSet sample_k_mixture_component(const Vector& eigenvalues, int k,
                                                     RngStream& rng) {
  const int n = static_cast<int>(eigenvalues.size());
  if (k < 0 || k > n) throw std::invalid_argument("sample_k_mixture_component: k out of range");
  ElementaryIndexSet out;
  if (k == 0) return out;
  const Matrix table = elementary_symmetric_table(eigenvalues, k);
  int remaining = k;
  for (int i = n; i >= 1 && remaining > 0; --i) {
    double include;
    if (i == remaining) {
      include = 1.0;  // every remaining value is forced in
    } else if (table(remaining, i) <= 0.0) {
      include = 1.0;  // unreachable state up to round-off; mass must come from inclusion
    } else {
      include = eigenvalues(i - 1) * table(remaining - 1, i - 1) / table(remaining, i);
    }
    if (rng.uniform() < include) {
      out.indices.push_back(i - 1);
      --remaining;
    }
  }
  if (remaining != 0) {
    throw std::runtime_error("sample_k_mixture_component: recursion failed to place k indices");
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

/// Phase 2: sample from the elementary DPP spanned by the selected
/// orthonormal columns. Each step picks an item with probability equal to
/// its mean squared row norm, then eliminates the chosen coordinate and
/// re-orthonormalizes the basis. Always returns exactly |J| items.
inline Subset sample_elementary(const Matrix& eigenvectors, const ElementaryIndexSet& j,
                                RngStream& rng) {
  const Eigen::Index n = eigenvectors.rows();
  const int k = j.size();
  if (k == 0) return Subset{};
  Matrix basis(n, k);
  for (int c = 0; c < k; ++c) {
    if (j.indices[c] < 0 || j.indices[c] >= eigenvectors.cols()) {
      throw std::invalid_argument("sample_elementary: eigenvector index out of range");
    }
    basis.col(c) = eigenvectors.col(j.indices[c]);
  }
  std::vector<int> picked;
  picked.reserve(k);
  int active = k;
  while (active > 0) {
    // Row squared norms over the active columns form the item distribution.
    Vector weights = basis.leftCols(active).rowwise().squaredNorm();
    const double total = weights.sum();
    double u = rng.uniform() * total;
    Eigen::Index item = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights(i) <= 0.0) continue;
      item = i;
      u -= weights(i);
      if (u < 0.0) break;
    }
    if (item < 0) {
      throw std::runtime_error("sample_elementary: no item carries positive weight");
    }
    picked.push_back(static_cast<int>(item));
    --active;
    if (active == 0) break;

    // Eliminate the picked item's coordinate: fold the pivot column into the
    // others, zero the row exactly, and re-orthonormalize what is left.
    Eigen::Index pivot_col = 0;
    basis.row(item).head(active + 1).cwiseAbs().maxCoeff(&pivot_col);
    const double pivot = basis(item, pivot_col);
    if (pivot == 0.0) {
      throw std::runtime_error("sample_elementary: degenerate basis (zero pivot)");
    }
    for (Eigen::Index c = 0; c <= active; ++c) {
      if (c == pivot_col) continue;
      basis.col(c) -= (basis(item, c) / pivot) * basis.col(pivot_col);
    }
    if (pivot_col != active) basis.col(pivot_col) = basis.col(active);
    basis.row(item).head(active).setZero();
    for (Eigen::Index c = 0; c < active; ++c) {
      for (Eigen::Index p = 0; p < c; ++p) {
        basis.col(c) -= basis.col(p).dot(basis.col(c)) * basis.col(p);
      }
      const double norm = basis.col(c).norm();
      if (norm < 1e-12) {
        throw std::runtime_error("sample_elementary: basis collapsed during orthogonalization");
      }
      basis.col(c) /= norm;
    }
  }
  return Subset(std::move(picked));
}

/// Draws one set from the DPP: a mixture component first, then its
/// elementary DPP. The sampled size always equals |J|.
inline Subset sample_dpp(const SpectralKernel& k, RngStream& rng) {
  const ElementaryIndexSet j = sample_mixture_component(k, rng);
  return sample_elementary(k.eigenvectors(), j, rng);
}

/// Draws one size-k set with P(Y) proportional to det(L_Y).
inline Subset sample_k_dpp(const LKernel& l, int k, RngStream& rng) {
  const int n = l.size();
  if (k < 0 || k > n) throw std::invalid_argument("sample_k_dpp: k out of range");
  int rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (l.eigen().values(i) > 1e-12) ++rank;
  }
  if (k > rank) {
    throw std::runtime_error("sample_k_dpp: k = " + std::to_string(k) +
                             " exceeds numerical rank " + std::to_string(rank));
  }
  const ElementaryIndexSet j = sample_k_mixture_component(l.eigen().values, k, rng);
  return sample_elementary(l.eigen().vectors, j, rng);
}

/// Singleton inclusion marginals of the k-DPP with kernel L: entry j is
/// the total probability of size-k sets containing item j. Entries lie in
/// [0,1] and sum to k.
inline Vector k_dpp_singleton_marginals(const LKernel& l, int k) {
  const int n = l.size();
  if (k < 0 || k > n) throw std::invalid_argument("k_dpp_singleton_marginals: k out of range");
  Vector out = Vector::Zero(n);
  if (k == 0) return out;
  const Vector& mu = l.eigen().values;
  const Matrix& v = l.eigen().vectors;
  const double ek = elementary_symmetric(mu, k);
  if (ek <= 0.0) {
    throw std::domain_error("k_dpp_singleton_marginals: no support on size-k sets (e_k = 0)");
  }
  Vector reduced(n - 1);
  for (int r = 0; r < n; ++r) {
    for (int i = 0, t = 0; i < n; ++i) {
      if (i != r) reduced(t++) = mu(i);
    }
    const double weight = mu(r) * elementary_symmetric(reduced, k - 1) / ek;
    out += weight * v.col(r).cwiseAbs2();
  }
  for (Eigen::Index i = 0; i < n; ++i) out(i) = std::min(1.0, std::max(0.0, out(i)));
  return out;
}

struct GreedyMapResult {
  Subset set;
  /// False when the requested size was unreachable: every remaining
  /// augmentation had probability zero and the set was returned short.
  bool complete = true;
};

/// Greedy high-probability set of size k: starting from the empty set, add
/// the item that maximizes the augmented set log-likelihood, breaking ties
/// toward the lowest index.
inline GreedyMapResult greedy_map(const SpectralKernel& k, int size) {
  if (size < 0 || size > k.size()) throw std::invalid_argument("greedy_map: k out of range");
  std::vector<int> current;
  for (int step = 0; step < size; ++step) {
    double best = kNegInf;
    int best_item = -1;
    for (int candidate = 0; candidate < k.size(); ++candidate) {
      if (std::binary_search(current.begin(), current.end(), candidate)) continue;
      std::vector<int> trial = current;
      trial.insert(std::lower_bound(trial.begin(), trial.end(), candidate), candidate);
      const double ll = set_log_likelihood(k, Subset(std::move(trial)));
      if (ll > best) {
        best = ll;
        best_item = candidate;
      }
    }
    if (best_item < 0 || best == kNegInf) {
      return {Subset(std::move(current)), false};
    }
    current.insert(std::lower_bound(current.begin(), current.end(), best_item), best_item);
  }
  return {Subset(std::move(current)), true};
}

}  // namespace dpplearn
