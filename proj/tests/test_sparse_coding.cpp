#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "corrdict/sparse_coding.hpp"
#include "support.hpp"

using namespace corrdict;

namespace {

// Randomly rotated union of the identity and four Hadamard columns: 8 x 12,
// coherence exactly 1/sqrt(8).
Dictionary two_basis_dictionary(Rng& rng) {
  Eigen::MatrixXd h(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      h(i, j) = (std::popcount(static_cast<unsigned>(i & j)) % 2 ? -1.0 : 1.0) / std::sqrt(8.0);
    }
  }
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(test::gaussian(rng, 8, 8)).householderQ();
  Eigen::MatrixXd a(8, 12);
  a.leftCols(8).setIdentity();
  const auto cols = rng.sample_without_replacement(8, 4);
  for (int j = 0; j < 4; ++j) a.col(8 + j) = h.col(static_cast<Eigen::Index>(cols[j]));
  return Dictionary(q * a);
}

// Best 2-subset by exhaustive least squares.
std::pair<Eigen::Index, Eigen::Index> best_pair(const Eigen::VectorXd& y, const Dictionary& d) {
  double best = 1e300;
  std::pair<Eigen::Index, Eigen::Index> arg{0, 0};
  for (Eigen::Index i = 0; i < d.n_atoms(); ++i) {
    for (Eigen::Index j = i + 1; j < d.n_atoms(); ++j) {
      Eigen::MatrixXd a(d.n_dim(), 2);
      a << d.atom(i), d.atom(j);
      const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
      const double e = (y - a * c).norm();
      if (e < best) {
        best = e;
        arg = {i, j};
      }
    }
  }
  return arg;
}

double en_scalar(double x, double u, double lambda, double gamma) {
  return 0.5 * (x - u) * (x - u) + lambda * (std::abs(u) + 0.5 * gamma * u * u);
}

}  // namespace

TEST_CASE("omp recovers an atom signal with one selection") {
  Rng rng(1);
  const Dictionary d = test::random_dictionary(rng, 6, 5);
  const OmpResult r = omp(d.atom(2), d, {1, 1e-10});
  REQUIRE(r.support == SupportSet{2});
  CHECK(r.x(2) == doctest::Approx(1.0));
  CHECK((r.x.array() != 0.0).count() == 1);
  CHECK(r.trace.residual_norm_per_iter.back() < 1e-12);
}

TEST_CASE("omp on a zero signal returns zero without iterating") {
  Rng rng(2);
  const Dictionary d = test::random_dictionary(rng, 4, 6);
  const OmpResult r = omp(Eigen::VectorXd::Zero(4), d, {3, 0.0});
  CHECK(r.x.isZero(0.0));
  CHECK(r.support.empty());
  CHECK(r.trace.iterations == 0);
}

TEST_CASE("omp with an orthonormal dictionary selects by magnitude") {
  const Dictionary d(Eigen::MatrixXd::Identity(3, 3));
  const OmpResult r = omp(Eigen::Vector3d(3, 0, 4), d, {2, 0.0});
  CHECK(r.support == SupportSet{2, 0});
  CHECK(r.x(0) == doctest::Approx(3.0));
  CHECK(r.x(1) == 0.0);
  CHECK(r.x(2) == doctest::Approx(4.0));
  CHECK(r.trace.residual_norm_per_iter.back() < 1e-12);
}

TEST_CASE("omp selects anti-correlated atoms and breaks ties by lowest index") {
  const Dictionary d(Eigen::MatrixXd::Identity(2, 2));
  const OmpResult neg = omp(Eigen::Vector2d(0.1, -2.0), d, {1, 0.0});
  CHECK(neg.support == SupportSet{1});
  CHECK(neg.x(1) == doctest::Approx(-2.0));
  const OmpResult tie = omp(Eigen::Vector2d(1.0, -1.0), d, {1, 0.0});
  CHECK(tie.support == SupportSet{0});
}

TEST_CASE("omp matches exhaustive 2-subset search on planted signals") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const Dictionary d = two_basis_dictionary(rng);
    auto planted = rng.sample_without_replacement(12, 2);
    std::sort(planted.begin(), planted.end());
    const Eigen::VectorXd y = d.atom(static_cast<Eigen::Index>(planted[0])) +
                              d.atom(static_cast<Eigen::Index>(planted[1]));
    const OmpResult r = omp(y, d, {2, 1e-10});
    SupportSet s = r.support;
    std::sort(s.begin(), s.end());
    const auto [i, j] = best_pair(y, d);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == i);
    CHECK(s[1] == j);
    CHECK(static_cast<std::size_t>(i) == planted[0]);
    CHECK((y - d.atoms() * r.x).norm() < 1e-10);
  }
}

TEST_CASE("omp invariants on random signals") {
  Rng rng(8);
  const Dictionary d = test::random_dictionary(rng, 10, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd y = test::gaussian(rng, 10, 1);
    const OmpResult r = omp(y, d, {4, 0.0});
    CHECK(r.support.size() == 4);
    for (Eigen::Index k = 0; k < 20; ++k) {
      if (std::find(r.support.begin(), r.support.end(), k) == r.support.end()) {
        CHECK(r.x(k) == 0.0);
      }
    }
    // Orthogonal projection: the residual is orthogonal to every selected atom.
    const Eigen::VectorXd res = y - d.atoms() * r.x;
    for (auto k : r.support) CHECK(std::abs(res.dot(d.atom(k))) < 1e-10);
    const auto& norms = r.trace.residual_norm_per_iter;
    for (std::size_t i = 1; i < norms.size(); ++i) CHECK(norms[i] <= norms[i - 1] + 1e-12);
  }
}

TEST_CASE("omp stops at the residual tolerance before the sparsity cap") {
  const Dictionary d(Eigen::MatrixXd::Identity(4, 4));
  const OmpResult r = omp(Eigen::Vector4d(5, 0.001, 0, 0), d, {3, 0.01});
  CHECK(r.support == SupportSet{0});
}

TEST_CASE("omp_batch equals column-by-column omp for any thread count") {
  Rng rng(12);
  const Dictionary d = test::random_dictionary(rng, 8, 12);
  const Eigen::MatrixXd y = test::gaussian(rng, 8, 37);
  const OmpConfig cfg{3, 1e-9};
  const Eigen::MatrixXd one = omp_batch(y, d, cfg, 1);
  const Eigen::MatrixXd four = omp_batch(y, d, cfg, 4);
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    CHECK(one.col(i) == omp(y.col(i), d, cfg).x);
  }
  CHECK(one == four);

  const Eigen::MatrixXd atoms_as_signals = omp_batch(d.atoms(), d, {1, 0.0});
  CHECK(atoms_as_signals.isIdentity(1e-12));
  CHECK_THROWS_AS(omp_batch(Eigen::MatrixXd::Zero(7, 2), d, cfg), DimensionMismatch);
}

TEST_CASE("omp configuration validation") {
  const Dictionary d(Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(omp(Eigen::Vector3d(1, 2, 3), d, {0, 0.0}), InvalidConfig);
  CHECK_THROWS_AS(omp(Eigen::Vector3d(1, 2, 3), d, {4, 0.0}), InvalidConfig);
  CHECK_THROWS_AS(omp(Eigen::Vector3d(1, 2, 3), d, {1, -1.0}), InvalidConfig);
  CHECK_THROWS_AS(omp(Eigen::Vector2d(1, 2), d, {1, 0.0}), DimensionMismatch);
}

TEST_CASE("thresholding operators") {
  CHECK(soft_threshold(2.5, 1.0) == 1.5);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(hard_threshold(0.8, 0.5) == 0.8);
  CHECK(hard_threshold(0.3, 0.5) == 0.0);
  CHECK(hard_threshold(-0.9, 0.5) == -0.9);
  CHECK(hard_threshold(0.5, 0.5) == 0.0);
  CHECK(en_prox(3.0, 1.0, 1.0) == 1.0);

  Eigen::MatrixXd m(2, 2);
  m << 2.5, -0.5, -3.0, 0.2;
  Eigen::MatrixXd expected(2, 2);
  expected << 1.5, 0.0, -2.0, 0.0;
  CHECK(soft_threshold(m, 1.0) == expected);
  CHECK(en_prox(m, 1.0, 0.0) == expected);
  CHECK(en_prox(m, 1.0, 1.0) == expected / 2.0);
}

TEST_CASE("en_prox is the scalar elastic-net minimizer") {
  const double x = 2.0, lambda = 0.5, gamma = 2.0;
  const double u = test::grid_minimize([&](double v) { return en_scalar(x, v, lambda, gamma); },
                                       -5.0, 5.0);
  CHECK(std::abs(en_prox(x, lambda, gamma) - u) < 1e-6);
  CHECK(en_prox(x, lambda, gamma) == doctest::Approx(0.75));
}

TEST_CASE("en_sparse_code with an identity dictionary reaches the separable optimum") {
  const Dictionary d(Eigen::MatrixXd::Identity(4, 4));
  Eigen::MatrixXd y(4, 2);
  y << 2.0, -0.05, -1.3, 0.7, 0.2, 3.1, 0.0, -0.9;
  const EnConfig cfg{0.4, 1.5, 1e-12, 100};
  const EnResult r = en_sparse_code(y, d, cfg);
  CHECK(r.step == doctest::Approx(1.0));
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double u = test::grid_minimize(
          [&](double v) { return en_scalar(y(i, j), v, cfg.lambda, cfg.gamma); }, -5.0, 5.0);
      CHECK(std::abs(r.x(i, j) - u) < 1e-6);
    }
  }
}

TEST_CASE("en_sparse_code shrinks everything when lambda dominates the correlations") {
  Rng rng(21);
  const Dictionary d = test::random_dictionary(rng, 6, 9);
  const Eigen::MatrixXd y = test::gaussian(rng, 6, 5);
  const double lam = (d.atoms().transpose() * y).cwiseAbs().maxCoeff();
  const EnResult r = en_sparse_code(y, d, {lam, 1.0, 1e-8, 500});
  CHECK(r.x.isZero(0.0));
}

TEST_CASE("en_sparse_code warm started at its solution stops at once") {
  Rng rng(22);
  const Dictionary d = test::random_dictionary(rng, 8, 10);
  const Eigen::MatrixXd y = test::gaussian(rng, 8, 6);
  const EnConfig tight{0.2, 1.0, 1e-14, 20000};
  const EnResult solved = en_sparse_code(y, d, tight);
  const EnConfig cfg{0.2, 1.0, 1e-6, 500};
  const EnResult again = en_sparse_code(y, d, cfg, solved.x);
  CHECK(again.trace.iterations <= 2);
  CHECK(again.trace.rel_change_per_iter.back() < cfg.rel_change_tol);
}

TEST_CASE("en_sparse_code objective never increases and the trace is consistent") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Dictionary d = test::random_dictionary(rng, 12, 18);
    const Eigen::MatrixXd y = test::gaussian(rng, 12, 15);
    const EnConfig cfg{0.05, 0.5, 1e-9, 300};
    const EnResult r = en_sparse_code(y, d, cfg);
    const auto& obj = r.trace.objective_per_iter;
    REQUIRE(obj.size() == static_cast<std::size_t>(r.trace.iterations));
    CHECK(r.trace.rel_change_per_iter.size() == obj.size());
    CHECK(r.trace.residual_norm_per_iter.size() == obj.size());
    CHECK(obj.front() <= r.trace.initial_objective + 1e-12);
    for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] + 1e-12);
    CHECK(obj.back() == doctest::Approx(en_objective(y, d, r.x, cfg.lambda, cfg.gamma)));
  }
}

TEST_CASE("en_objective uses the entrywise l1 norm") {
  const Dictionary d(Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd y(2, 2), x(2, 2);
  y << 1, 0, 0, 1;
  x << 0.5, -1.0, 2.0, 0.0;
  // residual y - x = [0.5 1; -2 1]: squared norm 6.25; |x|_1 = 3.5; ||x||^2 = 5.25
  CHECK(en_objective(y, d, x, 0.1, 2.0) == doctest::Approx(0.5 * 6.25 + 0.1 * (3.5 + 5.25)));
}

TEST_CASE("elastic-net configuration validation") {
  CHECK_THROWS_AS(validate(EnConfig{0.0, 1.0, 1e-6, 10}), InvalidConfig);
  CHECK_THROWS_AS(validate(EnConfig{0.1, -1.0, 1e-6, 10}), InvalidConfig);
  CHECK_THROWS_AS(validate(EnConfig{0.1, 1.0, 0.0, 10}), InvalidConfig);
  CHECK_THROWS_AS(validate(EnConfig{0.1, 1.0, 1e-6, 0}), InvalidConfig);
  const Dictionary d(Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd y = Eigen::MatrixXd::Ones(2, 2);
  y(0, 0) = std::nan("");
  CHECK_THROWS_AS(en_sparse_code(y, d, EnConfig{}), NonFinite);
}
