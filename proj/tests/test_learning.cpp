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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dpplearn/learning.hpp"
#include "dpplearn/rng.hpp"
#include "oracles.hpp"

using namespace dpplearn;

namespace {

SpectralKernel diag_kernel(std::initializer_list<double> values) {
  Vector lam(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) lam(i++) = v;
  return SpectralKernel(Matrix::Identity(lam.size(), lam.size()), lam);
}

SubsetDataset make_dataset(int n, std::vector<Subset> sets) {
  return SubsetDataset(n, std::move(sets));
}

// Normalized hidden-set posterior q(J | Y) by enumeration of the elementary
// mixture, at the given eigenvalues.
std::vector<double> enumerate_posterior(const Matrix& v, const Vector& lam,
                                        const std::vector<int>& y,
                                        const std::vector<std::vector<int>>& j_list) {
  std::vector<double> q(j_list.size());
  double norm = 0.0;
  for (std::size_t t = 0; t < j_list.size(); ++t) {
    q[t] = oracles::p_of_j(lam, j_list[t]) * oracles::p_of_y_given_j(v, j_list[t], y);
    norm += q[t];
  }
  for (double& x : q) x /= norm;
  return q;
}

}  // namespace

TEST_CASE("ka gradient: scalar closed forms") {
  const SpectralKernel k = diag_kernel({0.5});
  CHECK(ka_gradient(k, make_dataset(1, {Subset({0})}))(0, 0) == Catch::Approx(2.0));
  CHECK(ka_gradient(k, make_dataset(1, {Subset{}}))(0, 0) == Catch::Approx(-2.0));
}

TEST_CASE("ka gradient names the singular example") {
  const SpectralKernel k = diag_kernel({1.0, 0.0});
  const SubsetDataset d = make_dataset(2, {Subset({0}), Subset({0, 1})});
  CHECK_THROWS_WITH(ka_gradient(k, d), Catch::Matchers::ContainsSubstring("example 2"));
}

TEST_CASE("ka gradient of a diagonal kernel is diagonal") {
  const SpectralKernel k = diag_kernel({0.3, 0.6, 0.8});
  RngStream rng(5);
  std::vector<Subset> sets;
  for (int i = 0; i < 6; ++i) sets.push_back(oracles::random_subset(3, 1 + (i % 2), rng));
  const SymmetricMatrix g = ka_gradient(k, make_dataset(3, std::move(sets)));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(std::abs(g(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("ka gradient matches symmetrized finite differences") {
  RngStream rng(11);
  const SpectralKernel k = oracles::random_kernel(5, rng, 0.2, 0.8);
  std::vector<Subset> sets;
  for (int i = 0; i < 10; ++i) {
    sets.push_back(oracles::random_subset(5, 1 + static_cast<int>(rng.uniform_below(3)), rng));
  }
  const SubsetDataset d = make_dataset(5, std::move(sets));
  const SymmetricMatrix g = ka_gradient(k, d);

  const double h = 1e-5;
  auto ll_of = [&](const Matrix& dense) {
    double total = 0.0;
    for (const Subset& y : d.examples()) total += set_log_likelihood(dense, y);
    return total;
  };
  for (int a = 0; a < 5; ++a) {
    for (int b = a; b < 5; ++b) {
      Matrix bump = Matrix::Zero(5, 5);
      bump(a, b) = h;
      bump(b, a) = h;  // symmetrized perturbation; doubles off-diagonal moves
      const double fd = (ll_of(k.dense() + bump) - ll_of(k.dense() - bump)) / (2.0 * h);
      const double expected = a == b ? g(a, a) : 2.0 * g(a, b);
      if (std::abs(expected) > 1e-6) {
        CHECK(fd == Catch::Approx(expected).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("projection clamps the spectrum and is idempotent") {
  RngStream rng(13);
  const Matrix v = oracles::random_orthonormal(3, rng);
  Vector lam(3);
  lam << 1.5, -0.2, 0.3;
  const Matrix q = v * lam.asDiagonal() * v.transpose();
  const SpectralKernel p = project_to_valid(SymmetricMatrix::from_dense(q));
  // Descending clamped spectrum: (1, 0.3, 0).
  CHECK(p.eigenvalues()(0) == Catch::Approx(1.0));
  CHECK(p.eigenvalues()(1) == Catch::Approx(0.3));
  CHECK(p.eigenvalues()(2) == Catch::Approx(0.0).margin(1e-12));

  const SpectralKernel p2 = project_to_valid(SymmetricMatrix::from_dense(p.dense()));
  CHECK((p2.dense() - p.dense()).norm() < 1e-10);
}

TEST_CASE("projection minimizes Frobenius distance over clamped spectra") {
  RngStream rng(17);
  const Matrix v = oracles::random_orthonormal(3, rng);
  Vector lam(3);
  lam << 1.8, -0.6, 0.4;
  const Matrix q = v * lam.asDiagonal() * v.transpose();
  const SpectralKernel p = project_to_valid(SymmetricMatrix::from_dense(q));
  const double projected_dist = (q - p.dense()).norm();
  for (double a = 0.0; a <= 1.0; a += 0.1) {
    for (double b = 0.0; b <= 1.0; b += 0.1) {
      for (double c = 0.0; c <= 1.0; c += 0.1) {
        Vector mu(3);
        mu << a, b, c;
        const Matrix cand = v * mu.asDiagonal() * v.transpose();
        CHECK(projected_dist <= (q - cand).norm() + 1e-12);
      }
    }
  }
}

TEST_CASE("e-step factors: scalar and R-collapse cases") {
  const SpectralKernel k1 = diag_kernel({0.5});
  const EStepFactors f1 = estep_factors(k1, Subset({0}));
  CHECK(f1.r(0) == Catch::Approx(1.0));
  CHECK(f1.h(0, 0) == Catch::Approx(1.0));
  CHECK(f1.lifted.col(0).norm() == Catch::Approx(1.0));

  // All eigenvalues 0.5 make R the identity, so Q equals Z and H = V_Y V_Y^T.
  RngStream rng(19);
  const Matrix v = oracles::random_orthonormal(4, rng);
  Vector lam = Vector::Constant(4, 0.5);
  const SpectralKernel k(v, lam);
  const Subset y({0, 2});
  const EStepFactors f = estep_factors(k, y);
  Matrix vy(2, 4);
  vy.row(0) = v.row(0);
  vy.row(1) = v.row(2);
  CHECK((f.h - vy * vy.transpose()).norm() < 1e-12);
}

TEST_CASE("e-step factors reject eigenvalues outside the open unit interval") {
  const SpectralKernel k = diag_kernel({1.0, 0.5});
  CHECK_THROWS_AS(estep_factors(k, Subset({0})), std::logic_error);
}

TEST_CASE("lemma oracle: the hidden-set posterior is a k-dpp in Q") {
  RngStream rng(23);
  const int n = 8;
  const SpectralKernel k = oracles::random_kernel(n, rng, 0.1, 0.9);
  const Subset y = oracles::random_subset(n, 3, rng);

  const EStepFactors f = estep_factors(k, y);
  // Build Q = R Z R from its definition, independent of the factor path.
  Matrix uy(n, 3);
  for (int c = 0; c < 3; ++c) uy.col(c) = k.eigenvectors().row(y.items()[c]).transpose();
  const Matrix z = uy * uy.transpose();
  const Matrix q_kernel = f.r.asDiagonal() * z * f.r.asDiagonal();

  // Nonzero spectrum of Q equals the spectrum of H.
  const EigenPair q_eig = sym_eigendecompose(SymmetricMatrix::from_dense(q_kernel));
  for (int i = 0; i < 3; ++i) {
    CHECK(q_eig.values(i) == Catch::Approx(f.h_values(i)).margin(1e-8));
  }
  for (int i = 3; i < n; ++i) CHECK(std::abs(q_eig.values(i)) < 1e-8);

  // Lifted columns are orthonormal.
  CHECK((f.lifted.transpose() * f.lifted - Matrix::Identity(3, 3)).norm() < 1e-6);

  // det(Q_J) / e_k(Q) matches the enumerated posterior for every |J| = 3.
  const auto j_list = oracles::k_subsets(n, 3);
  const std::vector<double> posterior =
      enumerate_posterior(k.eigenvectors(), k.eigenvalues(), y.items(), j_list);
  const double ek = elementary_symmetric(q_eig.values, 3);
  for (std::size_t t = 0; t < j_list.size(); ++t) {
    const double det_qj = oracles::cofactor_det(oracles::principal_minor(q_kernel, j_list[t]));
    CHECK(det_qj / ek == Catch::Approx(posterior[t]).margin(1e-8));
  }
}

TEST_CASE("e-step item marginals: forced full set and enumeration") {
  RngStream rng(29);
  const int n = 4;
  const SpectralKernel k = oracles::random_kernel(n, rng, 0.2, 0.8);
  const Subset full({0, 1, 2, 3});
  const Vector m = estep_item_marginals(estep_factors(k, full));
  for (int i = 0; i < n; ++i) CHECK(m(i) == Catch::Approx(1.0).margin(1e-8));

  const SpectralKernel k1 = diag_kernel({0.5});
  CHECK(estep_item_marginals(estep_factors(k1, Subset({0})))(0) == Catch::Approx(1.0));
}

TEST_CASE("e-step item marginals match the enumerated posterior") {
  RngStream rng(31);
  const int n = 8;
  const SpectralKernel k = oracles::random_kernel(n, rng, 0.1, 0.9);
  const Subset y = oracles::random_subset(n, 3, rng);
  const Vector m = estep_item_marginals(estep_factors(k, y));

  const auto j_list = oracles::k_subsets(n, 3);
  const std::vector<double> posterior =
      enumerate_posterior(k.eigenvectors(), k.eigenvalues(), y.items(), j_list);
  Vector expected = Vector::Zero(n);
  for (std::size_t t = 0; t < j_list.size(); ++t) {
    for (int idx : j_list[t]) expected(idx) += posterior[t];
  }
  for (int i = 0; i < n; ++i) CHECK(m(i) == Catch::Approx(expected(i)).margin(1e-9));
  CHECK(m.sum() == Catch::Approx(3.0).margin(1e-8));
  for (int i = 0; i < n; ++i) {
    CHECK(m(i) >= -1e-12);
    CHECK(m(i) <= 1.0 + 1e-12);
  }
}

TEST_CASE("eigenvalue update: clamped boundary cases") {
  const SpectralKernel k1 = diag_kernel({0.5});
  const Vector up = eigenvalue_update(k1, make_dataset(1, {Subset({0})}));
  CHECK(up(0) == Catch::Approx(1.0 - 1e-5));

  const SpectralKernel k2 = diag_kernel({0.4, 0.6});
  const Vector down = eigenvalue_update(k2, make_dataset(2, {Subset{}, Subset{}}));
  CHECK(down(0) == Catch::Approx(1e-5));
  CHECK(down(1) == Catch::Approx(1e-5));
}

TEST_CASE("eigenvalue update matches the exponential-sum definition") {
  RngStream rng(37);
  const int n = 8;
  const SpectralKernel k = oracles::random_kernel(n, rng, 0.1, 0.9);
  std::vector<Subset> sets;
  for (int i = 0; i < 5; ++i) {
    sets.push_back(oracles::random_subset(n, 1 + static_cast<int>(rng.uniform_below(3)), rng));
  }
  const SubsetDataset d = make_dataset(n, sets);
  const Vector got = eigenvalue_update(k, d, /*clamp_eps=*/0.0);

  Vector expected = Vector::Zero(n);
  double mean_size = 0.0;
  for (const Subset& y : sets) {
    const auto j_list = oracles::k_subsets(n, y.size());
    const std::vector<double> posterior =
        enumerate_posterior(k.eigenvectors(), k.eigenvalues(), y.items(), j_list);
    for (std::size_t t = 0; t < j_list.size(); ++t) {
      for (int idx : j_list[t]) expected(idx) += posterior[t];
    }
    mean_size += y.size();
  }
  expected /= static_cast<double>(sets.size());
  mean_size /= static_cast<double>(sets.size());

  for (int i = 0; i < n; ++i) CHECK(got(i) == Catch::Approx(expected(i)).margin(1e-9));
  CHECK(got.sum() == Catch::Approx(mean_size).margin(1e-8));
  for (int i = 0; i < n; ++i) {
    CHECK(got(i) >= 0.0);
    CHECK(got(i) <= 1.0);
  }
}

TEST_CASE("eigenvector gradient: trivial cases") {
  const SpectralKernel k1 = diag_kernel({0.5, 0.5});
  const Matrix zero = eigenvector_gradient(k1, k1.eigenvalues(), make_dataset(2, {Subset{}}));
  CHECK(zero.norm() == 0.0);

  const SpectralKernel k2 = diag_kernel({0.5});
  Vector lam(1);
  lam << 0.5;
  const Matrix g = eigenvector_gradient(k2, lam, make_dataset(1, {Subset({0})}));
  CHECK(g(0, 0) == Catch::Approx(2.0));
}

TEST_CASE("eigenvector gradient matches finite differences of the bound") {
  RngStream rng(41);
  const int n = 6;
  const SpectralKernel k = oracles::random_kernel(n, rng, 0.15, 0.85);
  std::vector<Subset> sets;
  for (int i = 0; i < 6; ++i) {
    sets.push_back(oracles::random_subset(n, 1 + static_cast<int>(rng.uniform_below(3)), rng));
  }
  const SubsetDataset d = make_dataset(n, sets);
  const Vector lam_next = eigenvalue_update(k, d, 1e-5);
  const Matrix g = eigenvector_gradient(k, lam_next, d);

  // Oracle objective: sum_i E_q[log p(Y_i | J; V)] with q enumerated from the
  // mixture at (V0, lambda_next) and held fixed while V is perturbed.
  std::vector<std::vector<std::vector<int>>> j_lists;
  std::vector<std::vector<double>> posts;
  for (const Subset& y : sets) {
    j_lists.push_back(oracles::k_subsets(n, y.size()));
    posts.push_back(
        enumerate_posterior(k.eigenvectors(), lam_next, y.items(), j_lists.back()));
  }
  auto bound_of = [&](const Matrix& v) {
    double total = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (std::size_t t = 0; t < j_lists[i].size(); ++t) {
        if (posts[i][t] < 1e-300) continue;
        const double det = oracles::p_of_y_given_j(v, j_lists[i][t], sets[i].items());
        total += posts[i][t] * std::log(det);
      }
    }
    return total;
  };

  const double h = 1e-5;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      Matrix vp = k.eigenvectors();
      vp(a, b) += h;
      Matrix vm = k.eigenvectors();
      vm(a, b) -= h;
      const double fd = (bound_of(vp) - bound_of(vm)) / (2.0 * h);
      if (std::abs(g(a, b)) > 1e-6) {
        CHECK(fd == Catch::Approx(g(a, b)).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("eigenvector gradient rows vanish for never-observed items") {
  RngStream rng(43);
  const SpectralKernel k = oracles::random_kernel(5, rng, 0.2, 0.8);
  const SubsetDataset d = make_dataset(5, {Subset({0, 2}), Subset({2, 4})});
  const Matrix g = eigenvector_gradient(k, k.eigenvalues(), d);
  CHECK(g.row(1).norm() == 0.0);
  CHECK(g.row(3).norm() == 0.0);
  CHECK(g.row(0).norm() > 0.0);
}

TEST_CASE("stiefel step: exact no-ops and orthonormality") {
  RngStream rng(47);
  const Matrix v = oracles::random_orthonormal(5, rng);
  Matrix g(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) g(i, j) = rng.normal();
  }
  CHECK(stiefel_step(v, Matrix::Zero(5, 5), 0.3) == v);
  CHECK(stiefel_step(v, g, 0.0) == v);
  const Matrix moved = stiefel_step(v, g, 0.1);
  CHECK((moved.transpose() * moved - Matrix::Identity(5, 5)).norm() <= 1e-8);
  CHECK((moved - v).norm() > 1e-3);
}

TEST_CASE("orthonormality survives 500 consecutive steps with drift control") {
  RngStream rng(53);
  Matrix v = oracles::random_orthonormal(10, rng);
  for (int step = 0; step < 500; ++step) {
    Matrix g(10, 10);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) g(i, j) = rng.normal();
    }
    v = stiefel_step(v, g, 0.05);
    if ((v.transpose() * v - Matrix::Identity(10, 10)).norm() > 1e-8) {
      v = detail::reorthonormalize(v);
    }
  }
  CHECK((v.transpose() * v - Matrix::Identity(10, 10)).norm() <= 1e-7);
}

TEST_CASE("ka training ascends on data sampled from the initial kernel") {
  RngStream rng(59);
  const SpectralKernel k_true = oracles::random_kernel(6, rng, 0.2, 0.8);
  RngStream sampler(60);
  std::vector<Subset> sets;
  for (int i = 0; i < 150; ++i) sets.push_back(sample_dpp(k_true, sampler));
  const SubsetDataset d = make_dataset(6, std::move(sets));

  TrainConfig cfg;
  cfg.max_outer_iters = 40;
  const TrainReport r = train_ka(k_true, d, cfg);
  CHECK(r.final_log_likelihood >= r.initial_log_likelihood);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].log_likelihood >= r.trace[i - 1].log_likelihood - 1e-9);
  }
  REQUIRE(r.final_kernel.has_value());
}

TEST_CASE("ka training saturates a single always-present item") {
  const SpectralKernel k0 = diag_kernel({0.5});
  std::vector<Subset> sets(20, Subset({0}));
  const SubsetDataset d = make_dataset(1, std::move(sets));
  TrainConfig cfg;
  const TrainReport r = train_ka(k0, d, cfg);
  CHECK(r.final_kernel->eigenvalues()(0) >= 0.999);
  CHECK(r.final_log_likelihood >= -1e-6);
  CHECK(r.converged);
}

TEST_CASE("ka training rejects a probability-zero initial kernel") {
  const SpectralKernel k0 = diag_kernel({1.0, 0.5});
  const SubsetDataset d = make_dataset(2, {Subset{}});
  TrainConfig cfg;
  CHECK_THROWS_AS(train_ka(k0, d, cfg), std::invalid_argument);
}

TEST_CASE("em training ascends with a monotone accepted trace") {
  RngStream rng(61);
  const SpectralKernel k_true = oracles::random_kernel(8, rng, 0.15, 0.85);
  RngStream sampler(62);
  std::vector<Subset> sets;
  for (int i = 0; i < 200; ++i) sets.push_back(sample_dpp(k_true, sampler));
  const SubsetDataset d = make_dataset(8, std::move(sets));

  RngStream init_rng(63);
  const SpectralKernel k0 = wishart_init(8, init_rng);
  TrainConfig cfg;
  cfg.max_outer_iters = 60;
  const TrainReport r = train_em(k0, d, cfg);
  CHECK(r.final_log_likelihood >= r.initial_log_likelihood);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].log_likelihood >= r.trace[i - 1].log_likelihood - 1e-9);
  }
  const Matrix v = r.final_kernel->eigenvectors();
  CHECK((v.transpose() * v - Matrix::Identity(8, 8)).norm() <= 1e-7);
}

TEST_CASE("em escapes a near-diagonal start on anti-correlated data; ka stays") {
  // Ground truth: three tight pairs of near-duplicate items. Observing data
  // from it demands strong negative interactions within each pair.
  const int n = 6;
  Matrix feats(n, 3);
  feats.setZero();
  RngStream noise(71);
  for (int i = 0; i < n; ++i) {
    feats(i, i / 2) = 1.0;
    for (int c = 0; c < 3; ++c) feats(i, c) += 0.08 * noise.normal();
    feats.row(i) /= feats.row(i).norm();
  }
  const Matrix l_true = 4.0 * feats * feats.transpose() +
                        0.05 * Matrix::Identity(n, n);
  const SpectralKernel k_true = marginal_from_l(LKernel(SymmetricMatrix::from_dense(l_true)));

  RngStream sampler(72);
  std::vector<Subset> sets;
  for (int i = 0; i < 400; ++i) sets.push_back(sample_dpp(k_true, sampler));
  const SubsetDataset d = make_dataset(n, std::move(sets));

  // Near-diagonal start: item frequencies on the diagonal plus faint noise.
  const MomentTable moments = empirical_moments(d);
  Matrix start = Matrix::Zero(n, n);
  start.diagonal() = moments.singles;
  RngStream jitter(73);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double e = 1e-3 * jitter.normal();
      start(i, j) = e;
      start(j, i) = e;
    }
  }
  const SpectralKernel k0 = project_to_valid(SymmetricMatrix::from_dense(start));

  TrainConfig cfg;
  cfg.max_outer_iters = 80;
  const TrainReport em = train_em(k0, d, cfg);
  const TrainReport ka = train_ka(k0, d, cfg);

  auto offdiag_fraction = [](const SpectralKernel& k) {
    Matrix m = k.dense();
    const double total = m.norm();
    m.diagonal().setZero();
    return m.norm() / total;
  };
  const double em_frac = offdiag_fraction(*em.final_kernel);
  const double ka_frac = offdiag_fraction(*ka.final_kernel);
  CHECK(em_frac > 0.05);
  CHECK(em_frac > ka_frac);
  CHECK(em.final_log_likelihood > ka.final_log_likelihood);
}

TEST_CASE("em matches or beats ka on most seeded synthetic trials") {
  const int n = 12;
  const int trials = 5;
  int em_wins = 0;
  for (int t = 1; t <= trials; ++t) {
    RngStream rng(100 + t);
    const SpectralKernel k_true = oracles::random_kernel(n, rng, 0.2, 0.85);
    RngStream sampler(200 + t);
    std::vector<Subset> sets;
    for (int i = 0; i < 220; ++i) sets.push_back(sample_dpp(k_true, sampler));
    SubsetDataset all = make_dataset(n, std::move(sets));
    RngStream split_rng(300 + t);
    auto [train, test] = split_train_test(all, 0.3, split_rng);

    RngStream init_rng(400 + t);
    const SpectralKernel k0 = wishart_init(n, init_rng);
    TrainConfig cfg;
    cfg.max_outer_iters = 80;
    const TrainReport em = train_em(k0, train, cfg);
    const TrainReport ka = train_ka(k0, train, cfg);
    const double em_ll = dataset_log_likelihood(*em.final_kernel, test);
    const double ka_ll = dataset_log_likelihood(*ka.final_kernel, test);
    if (em_ll >= ka_ll) ++em_wins;
  }
  CHECK(em_wins * 2 > trials);
}
