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

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpplearn/datasets.hpp"
#include "dpplearn/kernel.hpp"
#include "dpplearn/numerics.hpp"
#include "dpplearn/parallel.hpp"

namespace dpplearn {

/// Knobs shared by both trainers. The stopping threshold scales with the
/// dataset: a step is converged once the total train log-likelihood improves
/// by less than convergence_tol * n_examples.
struct TrainConfig {
  double convergence_tol = 1e-5;
  int max_outer_iters = 300;
  int max_step_halvings = 40;
  double eigenvalue_clamp = 1e-5;
  double initial_step = 1.0;
  bool step_warm_start = true;  // double eta after an accepted EM step
  std::uint64_t seed = 0;
  int threads = 1;  // >1 fans per-example work out to a worker pool

  void validate() const {
    if (!(convergence_tol > 0.0)) throw std::invalid_argument("TrainConfig: tol must be > 0");
    if (!(eigenvalue_clamp > 0.0 && eigenvalue_clamp < 0.5)) {
      throw std::invalid_argument("TrainConfig: eigenvalue clamp must lie in (0, 0.5)");
    }
    if (!(initial_step > 0.0)) throw std::invalid_argument("TrainConfig: initial step must be > 0");
    if (max_outer_iters < 0 || max_step_halvings < 1) {
      throw std::invalid_argument("TrainConfig: iteration limits out of range");
    }
  }
};

struct IterationStat {
  int iter = 0;
  double log_likelihood = 0.0;
  double eta = 0.0;  // accepted step size; 0 for an eigenvalue-only EM step
  int halvings = 0;
  double millis = 0.0;
};

struct TrainReport {
  std::string algorithm;
  std::vector<IterationStat> trace;
  std::optional<SpectralKernel> final_kernel;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  double initial_log_likelihood = 0.0;
  double final_log_likelihood = 0.0;
  double total_millis = 0.0;
};

/// Gradient of the set log-likelihood objective with respect to the dense
/// marginal kernel: the sum over examples of (K - I_Ybar_i)^{-1}.
inline SymmetricMatrix ka_gradient(const SpectralKernel& k, const SubsetDataset& d,
                                   int threads = 1) {
  if (d.ground_size() != k.size()) {
    throw std::invalid_argument("ka_gradient: ground-set size mismatch");
  }
  const Eigen::Index n = k.size();
  const Matrix zero = Matrix::Zero(n, n);
  Matrix total = chunked_reduce<Matrix>(
      d.size(), threads, zero,
      [&](std::size_t begin, std::size_t end) {
        Matrix partial = Matrix::Zero(n, n);
        for (std::size_t i = begin; i < end; ++i) {
          Matrix a = k.dense();
          for (Eigen::Index r = 0; r < n; ++r) {
            if (!d.examples()[i].contains(static_cast<int>(r))) a(r, r) -= 1.0;
          }
          Eigen::PartialPivLU<Matrix> lu(a);
          const double tiny = 1e-300 * static_cast<double>(n);
          for (Eigen::Index r = 0; r < n; ++r) {
            if (std::abs(lu.matrixLU()(r, r)) < tiny) {
              throw std::runtime_error("ka_gradient: singular term at example " +
                                       std::to_string(i + 1));
            }
          }
          partial += lu.inverse();
        }
        return partial;
      },
      [](Matrix acc, const Matrix& partial) -> Matrix { return acc + partial; });
  return SymmetricMatrix::from_dense(total);
}

/// Frobenius-nearest valid marginal kernel: eigendecompose and clamp the
/// spectrum into [0, 1], keeping the eigenvectors.
inline SpectralKernel project_to_valid(const SymmetricMatrix& q) {
  EigenPair eig = sym_eigendecompose(q);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    eig.values(i) = std::min(1.0, std::max(0.0, eig.values(i)));
  }
  return SpectralKernel(std::move(eig.vectors), std::move(eig.values));
}

/// Per-example E-step quantities: with R = diag(sqrt(lambda/(1-lambda))) and
/// V_Y the |Y| x N restriction of V's rows to Y, the conditional over hidden
/// index sets q(J | Y) is a |Y|-DPP whose kernel has the same nonzero
/// spectrum as H = V_Y R^2 V_Y^T. `lifted` holds that kernel's
/// nonzero-eigenvalue eigenvectors, recovered from H's eigenpairs.
struct EStepFactors {
  int example_index = 0;  // position of Y in the dataset
  Vector r;               // diagonal of R, length N
  Matrix v_rows;          // |Y| x N rows of V restricted to Y
  Matrix h;               // |Y| x |Y|
  Matrix h_vectors;       // eigenvectors of h, descending eigenvalue order
  Vector h_values;
  Matrix lifted;          // N x |Y|, orthonormal columns
};

inline EStepFactors estep_factors(const SpectralKernel& k, const Subset& y,
                                  int example_index = 0) {
  if (y.empty()) throw std::invalid_argument("estep_factors: example set must be nonempty");
  y.check_ground(k.size());
  const Eigen::Index n = k.size();
  const int m = y.size();
  EStepFactors f;
  f.example_index = example_index;
  f.r = Vector(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lam = k.eigenvalues()(j);
    if (!(lam > 0.0 && lam < 1.0)) {
      throw std::logic_error("estep_factors: eigenvalue outside clamp interval (0,1)");
    }
    f.r(j) = std::sqrt(lam / (1.0 - lam));
  }
  f.v_rows = Matrix(m, n);
  for (int a = 0; a < m; ++a) f.v_rows.row(a) = k.eigenvectors().row(y.items()[a]);

  const Matrix scaled = f.v_rows * f.r.asDiagonal();  // rows scaled by R
  const Matrix h = scaled * scaled.transpose();
  f.h = SymmetricMatrix::from_dense(h).mat();
  const EigenPair eig = sym_eigendecompose(SymmetricMatrix::from_dense(f.h));
  f.h_vectors = eig.vectors;
  f.h_values = eig.values;
  const double floor = std::max(1e-14 * std::max(f.h_values(0), 0.0), 0.0);
  if (!(f.h_values(m - 1) > floor)) {
    throw std::runtime_error("estep_factors: degenerate example " +
                             std::to_string(example_index + 1) + " (H is numerically singular)");
  }
  f.lifted = f.r.asDiagonal() * f.v_rows.transpose() * f.h_vectors *
             f.h_values.cwiseSqrt().cwiseInverse().asDiagonal();
  // Fix column signs: largest-magnitude entry positive. Marginals only use
  // squares; pinning the sign keeps the factors reproducible.
  for (int c = 0; c < m; ++c) {
    Eigen::Index argmax = 0;
    f.lifted.col(c).cwiseAbs().maxCoeff(&argmax);
    if (f.lifted(argmax, c) < 0.0) f.lifted.col(c) = -f.lifted.col(c);
  }
  return f;
}

/// Singleton marginals of the hidden index set: entry j is
/// q(j in J | Y) = sum_r lifted(j, r)^2. Entries lie in [0,1] and sum to |Y|.
inline Vector estep_item_marginals(const EStepFactors& f) {
  return f.lifted.cwiseAbs2().rowwise().sum();
}

/// Closed-form eigenvalue update: lambda'_j = (1/n) sum_i q(j in J | Y_i).
/// Empty examples force J = {} and contribute zero mass. The average is
/// self-normalizing into [0,1]; the result is re-clamped into
/// [clamp_eps, 1 - clamp_eps] (pass 0 to keep raw values).
inline Vector eigenvalue_update(const SpectralKernel& k, const SubsetDataset& d,
                                double clamp_eps = 1e-5, int threads = 1) {
  if (d.ground_size() != k.size()) {
    throw std::invalid_argument("eigenvalue_update: ground-set size mismatch");
  }
  if (d.size() == 0) throw std::invalid_argument("eigenvalue_update: empty dataset");
  const Eigen::Index n = k.size();
  Vector total = chunked_reduce<Vector>(
      d.size(), threads, Vector(Vector::Zero(n)),
      [&](std::size_t begin, std::size_t end) {
        Vector partial = Vector::Zero(n);
        for (std::size_t i = begin; i < end; ++i) {
          const Subset& y = d.examples()[i];
          if (y.empty()) continue;
          partial += estep_item_marginals(estep_factors(k, y, static_cast<int>(i)));
        }
        return partial;
      },
      [](Vector acc, const Vector& partial) -> Vector { return acc + partial; });
  total /= static_cast<double>(d.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    total(j) = std::min(1.0 - clamp_eps, std::max(clamp_eps, total(j)));
  }
  return total;
}

/// Exact first gradient of the lower-bound objective with respect to the
/// eigenvector matrix, taken right after the eigenvalue update: the sum over
/// examples of 2 H^{-1} V_Y R^2 scattered into the rows of Y, with R built
/// from lambda_next. Rows of items never observed stay zero.
inline Matrix eigenvector_gradient(const SpectralKernel& k, const Vector& lambda_next,
                                   const SubsetDataset& d, int threads = 1) {
  if (d.ground_size() != k.size()) {
    throw std::invalid_argument("eigenvector_gradient: ground-set size mismatch");
  }
  const Eigen::Index n = k.size();
  if (lambda_next.size() != n) {
    throw std::invalid_argument("eigenvector_gradient: eigenvalue vector size mismatch");
  }
  Vector r2(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lam = lambda_next(j);
    if (!(lam > 0.0 && lam < 1.0)) {
      throw std::logic_error("eigenvector_gradient: eigenvalue outside clamp interval (0,1)");
    }
    r2(j) = lam / (1.0 - lam);
  }
  const Matrix zero = Matrix::Zero(n, n);
  return chunked_reduce<Matrix>(
      d.size(), threads, zero,
      [&](std::size_t begin, std::size_t end) {
        Matrix partial = Matrix::Zero(n, n);
        for (std::size_t i = begin; i < end; ++i) {
          const Subset& y = d.examples()[i];
          if (y.empty()) continue;
          const int m = y.size();
          Matrix v_rows(m, n);
          for (int a = 0; a < m; ++a) v_rows.row(a) = k.eigenvectors().row(y.items()[a]);
          const Matrix h = v_rows * r2.asDiagonal() * v_rows.transpose();
          Eigen::PartialPivLU<Matrix> lu(0.5 * (h + h.transpose()));
          double max_pivot = 0.0;
          double min_pivot = std::numeric_limits<double>::infinity();
          for (int r = 0; r < m; ++r) {
            const double p = std::abs(lu.matrixLU()(r, r));
            max_pivot = std::max(max_pivot, p);
            min_pivot = std::min(min_pivot, p);
          }
          if (!(min_pivot > 1e-14 * std::max(max_pivot, 1e-300))) {
            throw std::runtime_error("eigenvector_gradient: degenerate example " +
                                     std::to_string(i + 1));
          }
          const Matrix block = 2.0 * lu.solve(v_rows) * r2.asDiagonal();
          for (int a = 0; a < m; ++a) partial.row(y.items()[a]) += block.row(a);
        }
        return partial;
      },
      [](Matrix acc, const Matrix& partial) -> Matrix { return acc + partial; });
}

/// One multiplicative update along the manifold of orthonormal matrices:
/// V <- V exp(eta (V^T G - G^T V)). The argument of the exponential is skew
/// by construction, so the result stays orthonormal.
inline Matrix stiefel_step(const Matrix& v, const Matrix& g, double eta) {
  if (v.rows() != v.cols() || g.rows() != v.rows() || g.cols() != v.cols()) {
    throw std::invalid_argument("stiefel_step: dimension mismatch");
  }
  const Eigen::Index n = v.rows();
  if ((v.transpose() * v - Matrix::Identity(n, n)).norm() > 1e-8) {
    throw std::invalid_argument("stiefel_step: V is not orthonormal");
  }
  if (eta == 0.0 || g.isZero(0.0)) return v;
  const Matrix vg = v.transpose() * g;
  const Matrix skew = eta * (vg - vg.transpose());
  return v * skew_matrix_exponential(skew);
}

namespace detail {

/// QR-style re-orthonormalization, flipping Q columns so the triangular
/// factor has a positive diagonal (keeps the result close to the input).
inline Matrix reorthonormalize(const Matrix& v) {
  Eigen::HouseholderQR<Matrix> qr(v);
  Matrix q = qr.householderQ() * Matrix::Identity(v.rows(), v.cols());
  const Matrix r = q.transpose() * v;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - from)
      .count();
}

}  // namespace detail

/// Projected gradient ascent on the entries of the marginal kernel.
/// Each outer iteration takes the likelihood gradient, then halves the step
/// size (starting from initial_step) until the projected trial kernel
/// improves the train log-likelihood. Exhausting the halvings counts as
/// convergence.
inline TrainReport train_ka(const SpectralKernel& k0, const SubsetDataset& d,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (d.ground_size() != k0.size()) throw std::invalid_argument("train_ka: size mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const double threshold = cfg.convergence_tol * static_cast<double>(d.size());

  TrainReport report;
  report.algorithm = "ka";
  SpectralKernel k = k0;
  double ll = dataset_log_likelihood(k, d, cfg.threads);
  if (ll == kNegInf) {
    throw std::invalid_argument(
        "train_ka: initial kernel assigns zero probability to an example");
  }
  report.initial_log_likelihood = ll;

  for (int iter = 1; iter <= cfg.max_outer_iters; ++iter) {
    const auto iter_start = std::chrono::steady_clock::now();
    const SymmetricMatrix grad = ka_gradient(k, d, cfg.threads);
    double eta = cfg.initial_step;
    int halvings = 0;
    bool accepted = false;
    SpectralKernel trial = k;
    double trial_ll = ll;
    while (halvings < cfg.max_step_halvings) {
      trial = project_to_valid(
          SymmetricMatrix::from_dense(k.dense() + eta * grad.mat()));
      trial_ll = dataset_log_likelihood(trial, d, cfg.threads);
      if (trial_ll > ll) {
        accepted = true;
        break;
      }
      eta *= 0.5;
      ++halvings;
    }
    if (!accepted) {
      report.converged = true;
      report.stop_reason = "step-search exhausted";
      break;
    }
    const double delta = trial_ll - ll;
    k = std::move(trial);
    ll = trial_ll;
    report.trace.push_back({iter, ll, eta, halvings, detail::elapsed_ms(iter_start)});
    report.iterations = iter;
    if (delta < threshold) {
      report.converged = true;
      report.stop_reason = "converged";
      break;
    }
  }
  if (report.stop_reason.empty()) {
    report.converged = false;
    report.stop_reason = "iteration cap reached";
  }
  report.final_kernel = std::move(k);
  report.final_log_likelihood = ll;
  report.total_millis = detail::elapsed_ms(t0);
  return report;
}

/// Expectation-maximization over the spectral parameterization. Each outer
/// iteration commits the closed-form eigenvalue update, then takes a single
/// line-searched gradient step on the eigenvectors along the orthonormal
/// manifold. When the eigenvector search fails, the eigenvalue-only update
/// is kept if it alone improves the likelihood.
inline TrainReport train_em(const SpectralKernel& k0, const SubsetDataset& d,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (d.ground_size() != k0.size()) throw std::invalid_argument("train_em: size mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const double threshold = cfg.convergence_tol * static_cast<double>(d.size());
  const double eps = cfg.eigenvalue_clamp;
  const Eigen::Index n = k0.size();

  Matrix v = k0.eigenvectors();
  Vector lam = k0.eigenvalues();
  for (Eigen::Index j = 0; j < n; ++j) {
    lam(j) = std::min(1.0 - eps, std::max(eps, lam(j)));
  }

  TrainReport report;
  report.algorithm = "em";
  SpectralKernel k(v, lam);
  double ll = dataset_log_likelihood(k, d, cfg.threads);
  report.initial_log_likelihood = ll;
  double eta_next = cfg.initial_step;

  for (int iter = 1; iter <= cfg.max_outer_iters; ++iter) {
    const auto iter_start = std::chrono::steady_clock::now();
    const Vector lam_next = eigenvalue_update(k, d, eps, cfg.threads);
    const Matrix grad = eigenvector_gradient(k, lam_next, d, cfg.threads);
    const SpectralKernel k_mid(v, lam_next);
    const double ll_mid = dataset_log_likelihood(k_mid, d, cfg.threads);

    double eta = eta_next;
    int halvings = 0;
    bool v_accepted = false;
    Matrix v_trial;
    double trial_ll = ll_mid;
    while (halvings < cfg.max_step_halvings) {
      v_trial = stiefel_step(v, grad, eta);
      // Drift control: repeated matrix exponentials accumulate round-off.
      if ((v_trial.transpose() * v_trial - Matrix::Identity(n, n)).norm() > 1e-8) {
        v_trial = detail::reorthonormalize(v_trial);
      }
      trial_ll = dataset_log_likelihood(SpectralKernel(v_trial, lam_next), d, cfg.threads);
      if (trial_ll > ll_mid) {
        v_accepted = true;
        break;
      }
      eta *= 0.5;
      ++halvings;
    }

    double cand_ll;
    double accepted_eta;
    if (v_accepted) {
      cand_ll = trial_ll;
      accepted_eta = eta;
      if (cfg.step_warm_start) eta_next = 2.0 * eta;
    } else if (ll_mid > ll) {
      // Eigenvalue-only fallback: commit lambda', keep V.
      v_trial = v;
      cand_ll = ll_mid;
      accepted_eta = 0.0;
    } else {
      report.converged = true;
      report.stop_reason = "step-search exhausted";
      break;
    }

    const double delta = cand_ll - ll;
    if (!(delta > 0.0)) {
      report.converged = true;
      report.stop_reason = "converged";
      break;
    }
    v = std::move(v_trial);
    lam = lam_next;
    k = SpectralKernel(v, lam);
    ll = cand_ll;
    report.trace.push_back({iter, ll, accepted_eta, halvings, detail::elapsed_ms(iter_start)});
    report.iterations = iter;
    if (delta < threshold) {
      report.converged = true;
      report.stop_reason = "converged";
      break;
    }
  }
  if (report.stop_reason.empty()) {
    report.converged = false;
    report.stop_reason = "iteration cap reached";
  }
  report.final_kernel = SpectralKernel(v, lam);
  report.final_log_likelihood = ll;
  report.total_millis = detail::elapsed_ms(t0);
  return report;
}

}  // namespace dpplearn
