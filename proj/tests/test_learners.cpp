#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "corrdict/learners.hpp"
#include "corrdict/metrics.hpp"
#include "support.hpp"

using namespace corrdict;

namespace {

struct Planted {
  Dictionary d;
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};

Planted planted(std::uint64_t seed, Eigen::Index n, Eigen::Index k, Eigen::Index l, int t) {
  Rng rng(seed);
  Planted p{test::random_dictionary(rng, n, k), test::sparse_codes(rng, k, l, t), {}};
  p.y = p.d.atoms() * p.x;
  return p;
}

LearnerConfig small_config(Algorithm alg, Eigen::Index k, int t) {
  LearnerConfig cfg;
  cfg.algorithm = alg;
  cfg.n_atoms = k;
  cfg.omp = {t, 1e-9};
  cfg.max_outer_iters = 15;
  cfg.en = {0.05, 1.0, 1e-6, 200};
  return cfg;
}

}  // namespace

TEST_CASE("init_dictionary picks normalized distinct signals") {
  // Columns are scaled permutation vectors, so every pick is identifiable.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i) y((i * 5) % 6, i) = 2.0 + static_cast<double>(i);
  const Dictionary d = init_dictionary(y, 4, 11);
  std::set<Eigen::Index> rows;
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::Index r = 0;
    CHECK(d.atom(k).maxCoeff(&r) == doctest::Approx(1.0));
    CHECK(d.atom(k).sum() == doctest::Approx(1.0));
    rows.insert(r);
  }
  CHECK(rows.size() == 4);
  CHECK(init_dictionary(y, 4, 11).atoms() == d.atoms());
}

TEST_CASE("init_dictionary depends on the seed") {
  Rng rng(1);
  const Eigen::MatrixXd y = test::gaussian(rng, 5, 200);
  int differ = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    if (init_dictionary(y, 5, s).atoms() != init_dictionary(y, 5, s + 1).atoms()) ++differ;
  }
  CHECK(differ == 100);
}

TEST_CASE("init_dictionary skips zero signals and rejects too few") {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 6);
  y(0, 1) = 1.0;
  y(1, 3) = -2.0;
  y(2, 5) = 0.5;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dictionary d = init_dictionary(y, 3, s);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(d.atom(k).norm() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(init_dictionary(y, 4, 0), NotEnoughSignals);
  CHECK_THROWS_AS(init_dictionary(y, 7, 0), NotEnoughSignals);
}

TEST_CASE("group matrix is the thresholded gram matrix") {
  Rng rng(2);
  const Dictionary d = test::random_dictionary(rng, 4, 9);
  const Eigen::MatrixXd g = build_group_matrix(d, 0.5);
  const Eigen::MatrixXd full = d.atoms().transpose() * d.atoms();
  for (Eigen::Index i = 0; i < 9; ++i) {
    CHECK(g(i, i) == 1.0);
    for (Eigen::Index j = 0; j < 9; ++j) {
      CHECK(g(i, j) == g(j, i));
      if (std::abs(full(i, j)) > 0.5) {
        CHECK(g(i, j) == doctest::Approx(full(i, j)));
      } else {
        CHECK(g(i, j) == 0.0);
      }
    }
  }
  const Eigen::MatrixXd ortho =
      build_group_matrix(Dictionary(Eigen::MatrixXd::Identity(3, 3)), 0.7);
  CHECK(ortho.isIdentity(0.0));
  CHECK_THROWS_AS(build_group_matrix(d, 0.0), InvalidConfig);
  CHECK_THROWS_AS(build_group_matrix(d, 1.0), InvalidConfig);
}

TEST_CASE("rescaling finds the least-squares scale of each code") {
  Rng rng(3);
  const Dictionary d = test::random_dictionary(rng, 6, 5);
  const Eigen::MatrixXd y = test::gaussian(rng, 6, 8);
  Eigen::MatrixXd x = test::sparse_codes(rng, 5, 8, 2);
  x.col(7).setZero();
  const Rescaled r = rescale_coefficients(y, d, x);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const Eigen::VectorXd dx = d.atoms() * x.col(i);
    const double s = test::grid_minimize(
        [&](double v) { return (y.col(i) - v * dx).squaredNorm(); }, -20.0, 20.0);
    CHECK(std::abs(r.scales(i) - s) < 1e-6);
    CHECK((r.coefficients.col(i) - r.scales(i) * x.col(i)).norm() < 1e-14);
  }
  CHECK(r.scales(7) == 1.0);
  CHECK(r.coefficients.col(7).isZero(0.0));

  // Codes that are already least-squares optimal keep scale 1.
  const Eigen::MatrixXd exact = d.atoms() * x;
  const Rescaled same = rescale_coefficients(exact, d, x);
  for (Eigen::Index i = 0; i < 7; ++i) CHECK(same.scales(i) == doctest::Approx(1.0));

  std::vector<bool> mask(8, false);
  mask[2] = true;
  const Rescaled masked = rescale_coefficients(y, d, x, mask);
  CHECK(masked.scales(2) == doctest::Approx(r.scales(2)));
  CHECK(masked.scales(0) == 1.0);
  CHECK(masked.coefficients.col(0) == x.col(0));
  CHECK_THROWS_AS(rescale_coefficients(y, d, x, std::vector<bool>(3, true)), DimensionMismatch);
}

TEST_CASE("zero outer iterations return the initial dictionary") {
  const Planted p = planted(4, 8, 10, 100, 2);
  for (Algorithm alg : {Algorithm::kKsvd, Algorithm::kEnDl, Algorithm::kGroupedKsvd}) {
    LearnerConfig cfg = small_config(alg, 10, 2);
    cfg.max_outer_iters = 0;
    const LearnResult r = learn(p.y, cfg);
    CHECK(r.history.empty());
    CHECK(r.dictionary.atoms() == init_dictionary(p.y, 10, cfg.rng_seed).atoms());
  }
}

TEST_CASE("learners started at an orthonormal truth stay there") {
  // Orthonormal atoms make OMP recover every support exactly, so the truth
  // with its codes is a fixed point of each learner.
  Rng rng(5);
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(test::gaussian(rng, 12, 12)).householderQ();
  const Dictionary d = normalize_columns(q.leftCols(10));
  const Eigen::MatrixXd y = d.atoms() * test::sparse_codes(rng, 10, 300, 2);
  LearnOptions opts;
  opts.initial_dictionary = &d;
  opts.reference = &d;
  for (Algorithm alg : {Algorithm::kKsvd, Algorithm::kGroupedKsvd}) {
    const LearnResult r = learn(y, small_config(alg, 10, 2), opts);
    REQUIRE_FALSE(r.history.empty());
    for (const auto& rec : r.history) CHECK(rec.recon_error < 1e-8);
    CHECK(*r.history.back().dict_distance < 1e-12);
  }
  Dictionary wrong = normalize_columns(Eigen::MatrixXd::Ones(12, 9));
  opts.initial_dictionary = &wrong;
  CHECK_THROWS_AS(learn(y, small_config(Algorithm::kKsvd, 10, 2), opts), DimensionMismatch);
}

TEST_CASE("history records match the state handed to the observer") {
  Rng rng(6);
  const Eigen::MatrixXd y = test::gaussian(rng, 10, 200);
  const Dictionary ref = test::random_dictionary(rng, 10, 12);
  for (Algorithm alg : {Algorithm::kKsvd, Algorithm::kEnDl, Algorithm::kGroupedKsvd}) {
    LearnerConfig cfg = small_config(alg, 12, 3);
    cfg.max_outer_iters = 4;
    cfg.outer_rel_tol = 1e-12;
    LearnOptions opts;
    opts.reference = &ref;
    int calls = 0;
    opts.observer = [&](const IterationRecord& rec, const Dictionary& d,
                        const CoefficientMatrix& x) {
      ++calls;
      CHECK(rec.iter == calls);
      CHECK(rec.recon_error == doctest::Approx((y - d.atoms() * x).norm()).epsilon(1e-12));
      CHECK(rec.max_coherence == doctest::Approx(coherence(d).max_offdiag));
      CHECK(*rec.dict_distance == doctest::Approx(dictionary_distance(ref, d).total_distance));
      CHECK(rec.objective.has_value() == (alg == Algorithm::kEnDl));
    };
    const LearnResult r = learn(y, cfg, opts);
    CHECK(calls == 4);
    CHECK(r.history.size() == 4);
  }
}

TEST_CASE("k-svd recovers a random incoherent dictionary from noiseless data") {
  const Planted p = planted(7, 16, 20, 1500, 3);
  LearnerConfig cfg = small_config(Algorithm::kKsvd, 20, 3);
  cfg.max_outer_iters = 60;
  const LearnResult r = learn(p.y, cfg);
  const auto report = dictionary_distance(p.d, r.dictionary);
  CHECK(report.total_distance < 0.05 * 20);
  CHECK(report.recovery_rate >= 0.9);
}

TEST_CASE("k-svd dictionary half-steps never increase the error") {
  const Planted p = planted(12, 16, 24, 600, 3);
  Rng rng(13);
  const Eigen::MatrixXd y = p.y + 0.05 * test::gaussian(rng, 16, 600);
  const LearnerConfig cfg = small_config(Algorithm::kKsvd, 24, 3);

  Dictionary prev_d = init_dictionary(y, cfg.n_atoms, cfg.rng_seed);
  Eigen::MatrixXd prev_x = Eigen::MatrixXd::Zero(24, 600);
  double prev_err = -1.0;
  int outer_increases = 0;
  LearnOptions opts;
  opts.observer = [&](const IterationRecord& rec, const Dictionary& d, const CoefficientMatrix& x) {
    const Dictionary start =
        rec.iter > 1 ? clear_dictionary(y, prev_d, prev_x, cfg.clearing).dictionary : prev_d;
    const Eigen::MatrixXd codes = omp_batch(y, start, cfg.omp);
    const DictionaryUpdate upd = ksvd_update(y, start, codes, true);
    REQUIRE(upd.dictionary.atoms() == d.atoms());
    CHECK(rec.recon_error <= reconstruction_error(y, start, codes) + 1e-10);
    // Full iterations re-select supports, so they may rise; report rather than fail.
    if (prev_err >= 0.0 && rec.recon_error > prev_err + 1e-6) {
      ++outer_increases;
      MESSAGE("outer error rose at iteration " << rec.iter << ": " << prev_err << " -> "
                                                << rec.recon_error);
    }
    prev_err = rec.recon_error;
    prev_d = d;
    prev_x = x;
  };
  const LearnResult r = learn(y, cfg, opts);
  CHECK(r.history.size() >= 2);
  MESSAGE(outer_increases << " outer increases above 1e-6 in " << r.history.size()
                          << " iterations");
}

TEST_CASE("learning is deterministic for a fixed seed and independent of threads") {
  const Planted p = planted(8, 10, 12, 200, 2);
  for (Algorithm alg : {Algorithm::kKsvd, Algorithm::kEnDl, Algorithm::kGroupedKsvd}) {
    LearnerConfig cfg = small_config(alg, 12, 2);
    cfg.max_outer_iters = 5;
    const LearnResult a = learn(p.y, cfg);
    cfg.threads = 3;
    const LearnResult b = learn(p.y, cfg);
    CHECK(a.dictionary.atoms() == b.dictionary.atoms());
    CHECK(a.coefficients == b.coefficients);
    cfg.rng_seed = 1;
    CHECK(learn(p.y, cfg).dictionary.atoms() != a.dictionary.atoms());
  }
}

TEST_CASE("grouped k-svd with an identity dictionary matches k-svd") {
  // Orthogonal atoms give G = I, so grouping changes nothing.
  Rng rng(9);
  const Dictionary d(Eigen::MatrixXd::Identity(8, 8));
  const Eigen::MatrixXd y = d.atoms() * test::sparse_codes(rng, 8, 100, 2) +
                            0.01 * test::gaussian(rng, 8, 100);
  LearnOptions opts;
  opts.initial_dictionary = &d;
  LearnerConfig cfg = small_config(Algorithm::kKsvd, 8, 2);
  cfg.max_outer_iters = 1;
  const LearnResult plain = learn(y, cfg, opts);
  cfg.algorithm = Algorithm::kGroupedKsvd;
  const LearnResult grouped = learn(y, cfg, opts);
  CHECK(plain.dictionary.atoms() == grouped.dictionary.atoms());
  CHECK(plain.coefficients == grouped.coefficients);
}

TEST_CASE("en-dl objective is nonincreasing") {
  Rng rng(10);
  const Eigen::MatrixXd y = test::gaussian(rng, 10, 150);
  LearnerConfig cfg = small_config(Algorithm::kEnDl, 12, 3);
  cfg.en = {0.1, 1.0, 1e-10, 2000};
  cfg.outer_rel_tol = 1e-12;
  const LearnResult r = learn(y, cfg);
  REQUIRE(r.history.size() >= 2);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    REQUIRE(r.history[i].objective.has_value());
    CHECK(*r.history[i].objective <= *r.history[i - 1].objective + 1e-8);
  }
}

TEST_CASE("the outer loop stops on small relative change") {
  const Planted p = planted(11, 10, 8, 200, 2);
  LearnerConfig cfg = small_config(Algorithm::kKsvd, 8, 2);
  cfg.max_outer_iters = 200;
  cfg.outer_rel_tol = 0.5;
  const LearnResult r = learn(p.y, cfg);
  CHECK(r.history.size() < 200);
  const auto& h = r.history;
  const bool exact = h.back().recon_error == 0.0;
  const bool small = h.size() >= 2 && std::abs(h[h.size() - 2].recon_error - h.back().recon_error) <
                                          0.5 * h[h.size() - 2].recon_error;
  CHECK((exact || small));
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i].iter == static_cast<int>(i + 1));
}

TEST_CASE("learner configuration validation") {
  const Eigen::MatrixXd y = Eigen::MatrixXd::Ones(4, 10);
  LearnerConfig cfg = small_config(Algorithm::kKsvd, 5, 2);
  CHECK_NOTHROW(validate(cfg, y));
  cfg.omp.max_sparsity = 5;
  CHECK_THROWS_AS(validate(cfg, y), InvalidConfig);
  cfg = small_config(Algorithm::kGroupedKsvd, 5, 2);
  cfg.group_threshold = 1.0;
  CHECK_THROWS_AS(validate(cfg, y), InvalidConfig);
  cfg = small_config(Algorithm::kEnDl, 5, 2);
  cfg.en.lambda = 0.0;
  CHECK_THROWS_AS(validate(cfg, y), InvalidConfig);
  cfg = small_config(Algorithm::kKsvd, 0, 1);
  CHECK_THROWS_AS(validate(cfg, y), InvalidConfig);
  cfg = small_config(Algorithm::kKsvd, 5, 2);
  cfg.outer_rel_tol = 0.0;
  CHECK_THROWS_AS(validate(cfg, y), InvalidConfig);
  CHECK(parse_algorithm("grouped_ksvd") == Algorithm::kGroupedKsvd);
  CHECK(to_string(Algorithm::kEnDl) == "en_dl");
  CHECK_THROWS_AS(parse_algorithm("mod"), InvalidConfig);
}
