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

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpplearn/inference.hpp"
#include "dpplearn/kernel.hpp"
#include "dpplearn/rng.hpp"

namespace dpplearn {

/// An ordered collection of observed subsets of {0..N-1}, plus an optional
/// item catalog (0-based internal id -> display name).
class SubsetDataset {
 public:
  SubsetDataset(int ground_size, std::vector<Subset> examples,
                std::map<int, std::string> catalog = {})
      : n_(ground_size), examples_(std::move(examples)), catalog_(std::move(catalog)) {
    if (n_ < 1) throw std::invalid_argument("SubsetDataset: ground size must be >= 1");
    for (const Subset& y : examples_) {
      y.check_ground(n_);
      max_size_ = std::max(max_size_, y.size());
    }
    for (const auto& [id, name] : catalog_) {
      if (id < 0 || id >= n_) {
        throw std::invalid_argument("SubsetDataset: catalog id outside ground set");
      }
    }
  }

  int ground_size() const { return n_; }
  std::size_t size() const { return examples_.size(); }
  const std::vector<Subset>& examples() const { return examples_; }
  std::span<const Subset> span() const { return examples_; }
  int max_example_size() const { return max_size_; }
  const std::map<int, std::string>& catalog() const { return catalog_; }

  double mean_size() const {
    if (examples_.empty()) return 0.0;
    double total = 0.0;
    for (const Subset& y : examples_) total += y.size();
    return total / static_cast<double>(examples_.size());
  }

 private:
  int n_;
  std::vector<Subset> examples_;
  std::map<int, std::string> catalog_;
  int max_size_ = 0;
};

inline double dataset_log_likelihood(const SpectralKernel& k, const SubsetDataset& d,
                                     int threads = 1) {
  if (d.ground_size() != k.size()) {
    throw std::invalid_argument("dataset_log_likelihood: ground-set size mismatch");
  }
  return dataset_log_likelihood(k, d.span(), threads);
}

/// Empirical first- and second-order moments: singles on the diagonal,
/// pair co-occurrence frequencies off it.
struct MomentTable {
  Vector singles;
  SymmetricMatrix pairs;
};

inline void validate_moments(const MomentTable& t) {
  const Eigen::Index n = t.singles.size();
  if (t.pairs.size() != n) throw std::invalid_argument("MomentTable: dimension mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t.singles(i) < 0.0 || t.singles(i) > 1.0) {
      throw std::invalid_argument("MomentTable: single frequency outside [0,1]");
    }
    if (t.pairs(i, i) != t.singles(i)) {
      throw std::invalid_argument("MomentTable: diagonal must equal singles");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double cap = std::min(t.singles(i), t.singles(j));
      if (t.pairs(i, j) < 0.0 || t.pairs(i, j) > cap + 1e-12) {
        throw std::invalid_argument("MomentTable: pair frequency exceeds its singles");
      }
    }
  }
}

inline MomentTable empirical_moments(const SubsetDataset& d) {
  if (d.size() < 1) throw std::invalid_argument("empirical_moments: empty dataset");
  const int n = d.ground_size();
  MomentTable t{Vector::Zero(n), SymmetricMatrix(n)};
  Matrix counts = Matrix::Zero(n, n);
  for (const Subset& y : d.examples()) {
    const auto& items = y.items();
    for (std::size_t a = 0; a < items.size(); ++a) {
      counts(items[a], items[a]) += 1.0;
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        counts(items[a], items[b]) += 1.0;
        counts(items[b], items[a]) += 1.0;
      }
    }
  }
  counts /= static_cast<double>(d.size());
  t.singles = counts.diagonal();
  t.pairs = SymmetricMatrix::from_dense(counts);
  return t;
}

/// Seeded shuffle split into (train, test); the test side gets
/// floor(test_fraction * n) examples.
inline std::pair<SubsetDataset, SubsetDataset> split_train_test(const SubsetDataset& d,
                                                                double test_fraction,
                                                                RngStream& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split_train_test: fraction must lie in (0,1)");
  }
  if (d.size() < 2) throw std::invalid_argument("split_train_test: need at least 2 examples");
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_below(i + 1)]);
  }
  const std::size_t n_test =
      static_cast<std::size_t>(test_fraction * static_cast<double>(d.size()));
  std::vector<Subset> test, train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? test : train).push_back(d.examples()[order[i]]);
  }
  return {SubsetDataset(d.ground_size(), std::move(train), d.catalog()),
          SubsetDataset(d.ground_size(), std::move(test), d.catalog())};
}

/// Moments-matching initializer: the diagonal is set to the single-item
/// frequencies, off-diagonals to sqrt(max(m_i m_j - m_ij, 0)), and the
/// result is projected by clipping eigenvalues into [0,1].
inline SpectralKernel moments_init(const MomentTable& t) {
  validate_moments(t);
  const Eigen::Index n = t.singles.size();
  SymmetricMatrix k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k.set(i, i, t.singles(i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k.set(i, j, std::sqrt(std::max(t.singles(i) * t.singles(j) - t.pairs(i, j), 0.0)));
    }
  }
  EigenPair eig = sym_eigendecompose(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    eig.values(i) = std::min(1.0, std::max(0.0, eig.values(i)));
  }
  return SpectralKernel(std::move(eig.vectors), std::move(eig.values));
}

/// Wishart initializer: L = A A^T / N for an N x N standard-normal A
/// (row-major fill order), converted to its marginal kernel.
inline SpectralKernel wishart_init(int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("wishart_init: N must be >= 1");
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  const Matrix l = (a * a.transpose()) / static_cast<double>(n);
  return marginal_from_l(LKernel(SymmetricMatrix::from_dense(l)));
}

/// Diversity statistic d = ||M||_F / (N * ||diag(M)||_2) over the moment
/// matrix M. Scale-free; larger values indicate stronger pairwise structure
/// relative to the singles.
inline double diversity_stat(const MomentTable& t) {
  const Eigen::Index n = t.singles.size();
  const double diag_norm = t.singles.norm();
  if (diag_norm <= 0.0) {
    throw std::domain_error("diversity_stat: moment diagonal is all zero");
  }
  return t.pairs.mat().norm() / (static_cast<double>(n) * diag_norm);
}

/// Draws n example sets from a ground-truth kernel, rejecting draws whose
/// size falls outside [min_size, max_size]. max_size < 0 disables the cap.
/// Persistently incompatible filters (acceptance below 0.1% over a window
/// of draws) raise an error instead of looping forever.
inline SubsetDataset synth_generate(const SpectralKernel& k_true, std::size_t n, RngStream& rng,
                                    int min_size = 0, int max_size = -1) {
  if (min_size < 0) throw std::invalid_argument("synth_generate: negative min_size");
  const int cap = max_size < 0 ? k_true.size() : max_size;
  std::vector<Subset> examples;
  examples.reserve(n);
  constexpr std::size_t kWindow = 20000;
  std::size_t window_attempts = 0;
  std::size_t window_accepts = 0;
  while (examples.size() < n) {
    Subset y = sample_dpp(k_true, rng);
    ++window_attempts;
    if (y.size() >= min_size && y.size() <= cap) {
      examples.push_back(std::move(y));
      ++window_accepts;
    }
    if (window_attempts >= kWindow) {
      if (window_accepts < kWindow / 1000) {
        throw std::runtime_error("synth_generate: kernel incompatible with size filter");
      }
      window_attempts = 0;
      window_accepts = 0;
    }
  }
  return SubsetDataset(k_true.size(), std::move(examples));
}

/// Optional ingestion filters; zero disables a filter. Applied in order:
/// keep the top_items most frequent items, drop items below
/// min_item_support occurrences, restrict example sizes to
/// [min_set_size, max_set_size], then compact item ids.
struct FilterOptions {
  int top_items = 0;
  int min_item_support = 0;
  int min_set_size = 0;
  int max_set_size = 0;
};

inline SubsetDataset filter_dataset(const SubsetDataset& d, const FilterOptions& opt) {
  const int n = d.ground_size();
  std::vector<std::int64_t> support(n, 0);
  for (const Subset& y : d.examples()) {
    for (int item : y.items()) ++support[item];
  }
  std::vector<bool> keep(n, true);
  if (opt.top_items > 0 && opt.top_items < n) {
    std::vector<int> by_freq(n);
    for (int i = 0; i < n; ++i) by_freq[i] = i;
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [&](int a, int b) { return support[a] > support[b]; });
    keep.assign(n, false);
    for (int r = 0; r < opt.top_items; ++r) keep[by_freq[r]] = true;
  }
  if (opt.min_item_support > 0) {
    for (int i = 0; i < n; ++i) {
      if (support[i] < opt.min_item_support) keep[i] = false;
    }
  }
  std::vector<int> remap(n, -1);
  int next_id = 0;
  for (int i = 0; i < n; ++i) {
    if (keep[i]) remap[i] = next_id++;
  }
  if (next_id == 0) throw std::runtime_error("filter_dataset: filters removed every item");

  std::vector<Subset> examples;
  for (const Subset& y : d.examples()) {
    std::vector<int> items;
    for (int item : y.items()) {
      if (remap[item] >= 0) items.push_back(remap[item]);
    }
    const int sz = static_cast<int>(items.size());
    if (sz < opt.min_set_size) continue;
    if (opt.max_set_size > 0 && sz > opt.max_set_size) continue;
    examples.push_back(Subset(std::move(items)));
  }
  std::map<int, std::string> catalog;
  for (const auto& [id, name] : d.catalog()) {
    if (remap[id] >= 0) catalog[remap[id]] = name;
  }
  return SubsetDataset(next_id, std::move(examples), std::move(catalog));
}

}  // namespace dpplearn
