#include "doctest.h"

#include <cmath>

#include "hlcr/linalg.hpp"
#include "oracles.hpp"

using namespace hlcr;

namespace {

double max_asymmetry(const SpdMatrix& m) {
  double worst = 0.0;
  for (std::size_t a = 0; a < m.dim(); ++a)
    for (std::size_t b = 0; b < m.dim(); ++b) {
      const double scale = std::max(1.0, std::abs(m(a, b)));
      worst = std::max(worst, std::abs(m(a, b) - m(b, a)) / scale);
    }
  return worst;
}

}  // namespace

TEST_CASE("invert: identity and diagonal") {
  CHECK(invert(SpdMatrix::identity(4)) == SpdMatrix::identity(4));
  const std::vector<double> diag{2.0, 4.0};
  const SpdMatrix h = invert(SpdMatrix::diagonal(diag));
  CHECK(h(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(h(0, 1) == 0.0);
}

TEST_CASE("invert: residual on random SPD") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const SpdMatrix d = oracle::random_spd(5, rng);
    const SpdMatrix h = invert(d);
    CHECK(inverse_residual(d, h) <= 1e-9);
    CHECK(max_asymmetry(h) <= 1e-12);
  }
}

TEST_CASE("invert: rejects indefinite input") {
  SpdMatrix m(2, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(invert(m), NonPositiveDefinite);
  CHECK_FALSE(is_positive_definite(m));
  CHECK_THROWS_AS(invert(SpdMatrix(3)), NonPositiveDefinite);
}

TEST_CASE("rank1_update_inverse") {
  SUBCASE("zero vector leaves H unchanged") {
    Rng rng(3);
    const SpdMatrix h = invert(oracle::random_spd(4, rng));
    CHECK(max_abs_diff(rank1_update_inverse(h, Vec(4, 0.0), 2.5), h) == 0.0);
  }
  SUBCASE("scalar case") {
    const SpdMatrix h = rank1_update_inverse(SpdMatrix::identity(1), Vec{1.0}, 1.0);
    CHECK(h(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("matches direct inversion of the updated matrix") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
      SpdMatrix d = oracle::random_spd(5, rng);
      const Vec x = oracle::random_vec(5, rng);
      const double s = 0.5 + rng.uniform();
      const SpdMatrix updated = rank1_update_inverse(invert(d), x, s);
      d.add_outer(x, s);
      const SpdMatrix direct = oracle::lu_inverse(d);
      CHECK(max_abs_diff(updated, direct) <= 1e-9);
      CHECK(frobenius_diff(updated, direct) <= 1e-9 * frobenius_norm(direct));
      CHECK(is_positive_definite(updated));
      CHECK(max_asymmetry(updated) <= 1e-12);
    }
  }
}

TEST_CASE("rank1_downdate_inverse") {
  SUBCASE("scalar case") {
    const SpdMatrix h = rank1_downdate_inverse(SpdMatrix(1, {0.5}), Vec{1.0}, 1.0);
    CHECK(h(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("undoes an update") {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
      const SpdMatrix h = invert(oracle::random_spd(6, rng));
      const Vec x = oracle::random_vec(6, rng);
      const SpdMatrix back = rank1_downdate_inverse(rank1_update_inverse(h, x, 1.0), x, 1.0);
      CHECK(frobenius_diff(back, h) <= 1e-10 * frobenius_norm(h));
    }
  }
  SUBCASE("undoes a high-precision update up to conditioning") {
    // Round-off grows with (1 + s x^T H x)^2, here about 1e5.
    Rng rng(9);
    for (int rep = 0; rep < 50; ++rep) {
      const SpdMatrix h = invert(oracle::random_spd(6, rng));
      const Vec x = oracle::random_vec(6, rng, 3.0);
      const SpdMatrix back = rank1_downdate_inverse(rank1_update_inverse(h, x, 100.0), x, 100.0);
      CHECK(frobenius_diff(back, h) <= 1e-8 * frobenius_norm(h));
    }
  }
  SUBCASE("guard fires when the vector was never added") {
    // D = I, removing x x^T with x^T x = 1 leaves a singular matrix.
    CHECK_THROWS_AS(rank1_downdate_inverse(SpdMatrix::identity(2), Vec{1.0, 0.0}, 1.0),
                    DowndateSingular);
    CHECK_THROWS_AS(rank1_downdate_inverse(SpdMatrix::identity(2), Vec{2.0, 0.0}, 1.0),
                    DowndateSingular);
    SpdMatrix h = SpdMatrix::identity(2);
    CHECK_FALSE(rank1_downdate_inverse_inplace(h, Vec{2.0, 0.0}, 1.0));
    CHECK(h == SpdMatrix::identity(2));
  }
}

TEST_CASE("cholesky and log_det agree with Eigen") {
  Rng rng(21);
  const SpdMatrix d = oracle::random_spd(7, rng);
  const SpdMatrix l = cholesky(d);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = r + 1; c < 7; ++c) CHECK(l(r, c) == 0.0);
  const double eigen_logdet = std::log(oracle::to_eigen(d).determinant());
  CHECK(log_det(d) == doctest::Approx(eigen_logdet).epsilon(1e-12));
}

TEST_CASE("long update/downdate chains stay symmetric and accurate") {
  Rng rng(99);
  const std::size_t F = 5;
  SpdMatrix d = SpdMatrix::scaled_identity(F, 1.0);
  SpdMatrix h = SpdMatrix::identity(F);
  std::vector<Vec> added;
  for (int n = 0; n < 2000; ++n) {
    const Vec x = oracle::random_vec(F, rng);
    d.add_outer(x, 100.0);
    rank1_update_inverse_inplace(h, x, 100.0);
    added.push_back(x);
    if (n % 3 == 2) {
      const Vec gone = added.front();
      added.erase(added.begin());
      d.add_outer(gone, -100.0);
      REQUIRE(rank1_downdate_inverse_inplace(h, gone, 100.0));
    }
  }
  CHECK(max_asymmetry(h) <= 1e-12);
  CHECK(inverse_residual(d, h) <= 1e-7);
}
