#include "forcematch/nnls.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "doctest.h"
#include "forcematch/errors.hpp"

using namespace forcematch;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix random_matrix(std::mt19937& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    }
  }
  return e;
}

}  // namespace

TEST_CASE("identity system clips the negative component") {
  Matrix a = from_rows({{1, 0}, {0, 1}});
  std::vector<double> b{3, -2};
  NnlsResult r = nnls(a, b);
  CHECK(r.x[0] == doctest::Approx(3.0));
  CHECK(r.x[1] == doctest::Approx(0.0));
  CHECK(r.rss == doctest::Approx(4.0));
}

TEST_CASE("interior one-dimensional solution") {
  Matrix a = from_rows({{1}, {1}});
  std::vector<double> b{1, 2};
  NnlsResult r = nnls(a, b);
  CHECK(r.x[0] == doctest::Approx(1.5));
  CHECK(r.rss == doctest::Approx(0.5));
}

TEST_CASE("exact nonnegative fit has zero residual") {
  Matrix a = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  std::vector<double> b{1, 2, 3};
  NnlsResult r = nnls(a, b);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(2.0));
  CHECK(r.x[2] == doctest::Approx(3.0));
  CHECK(r.rss == doctest::Approx(0.0));
}

TEST_CASE("KKT conditions hold on 1000 random instances") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix a = random_matrix(rng, 12, 5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> b(12);
    for (double& v : b) v = gauss(rng);

    NnlsResult r = nnls(a, b);

    Eigen::MatrixXd ae = to_eigen(a);
    Eigen::VectorXd be = Eigen::Map<const Eigen::VectorXd>(b.data(), 12);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(r.x.data(), 5);
    Eigen::VectorXd grad = ae.transpose() * (ae * x - be);
    double scale = std::max(1.0, (ae.transpose() * be).cwiseAbs().maxCoeff());

    for (int i = 0; i < 5; ++i) {
      CHECK(r.x[static_cast<std::size_t>(i)] >= 0.0);
      if (r.x[static_cast<std::size_t>(i)] > 0.0) {
        CHECK(std::abs(grad(i)) <= 1e-8 * scale);
      } else {
        CHECK(grad(i) >= -1e-8 * scale);
      }
    }
  }
}

TEST_CASE("matches unconstrained least squares when that solution is nonnegative") {
  // Oracle: Householder QR on the design matrix itself, a different algebraic
  // route than the solver's Gram-form active set.
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> positive(0.5, 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Matrix a = random_matrix(rng, 20, 4);
    Eigen::MatrixXd ae = to_eigen(a);
    Eigen::VectorXd x_true(4);
    for (int j = 0; j < 4; ++j) x_true(j) = positive(rng);
    Eigen::VectorXd be = ae * x_true;
    for (int i = 0; i < 20; ++i) be(i) += 0.01 * gauss(rng);

    Eigen::VectorXd ls = ae.colPivHouseholderQr().solve(be);
    if (ls.minCoeff() < 0.0) continue;
    ++compared;

    std::vector<double> b(be.data(), be.data() + 20);
    NnlsResult r = nnls(a, b);
    for (int j = 0; j < 4; ++j) {
      CHECK(r.x[static_cast<std::size_t>(j)] == doctest::Approx(ls(j)).epsilon(1e-8));
    }
    double ls_rss = (ae * ls - be).squaredNorm();
    CHECK(r.rss == doctest::Approx(ls_rss).epsilon(1e-8));
  }
  // Solutions were built positive, so nearly every trial should compare.
  CHECK(compared > 250);
}

TEST_CASE("gram entry point agrees with the design-matrix entry point") {
  std::mt19937 rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = random_matrix(rng, 15, 4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> b(15);
    for (double& v : b) v = gauss(rng);

    NnlsResult direct = nnls(a, b);

    Matrix gram(4, 4);
    std::vector<double> atb(4, 0.0);
    double btb = 0.0;
    for (std::size_t r = 0; r < 15; ++r) {
      btb += b[r] * b[r];
      for (std::size_t i = 0; i < 4; ++i) {
        atb[i] += a(r, i) * b[r];
        for (std::size_t j = 0; j < 4; ++j) gram(i, j) += a(r, i) * a(r, j);
      }
    }
    NnlsResult via_gram = nnls_gram(gram, atb, btb);

    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(via_gram.x[j] == doctest::Approx(direct.x[j]).epsilon(1e-9));
    }
    CHECK(via_gram.rss == doctest::Approx(direct.rss).epsilon(1e-7));
  }
}

TEST_CASE("iteration cap raises MaxIterations") {
  Matrix a = from_rows({{1, 0}, {0, 1}});
  std::vector<double> b{1, 1};
  NnlsOptions strangled;
  strangled.max_iterations_per_column = 0;
  CHECK_THROWS_AS(nnls(a, b, strangled), MaxIterations);
}

TEST_CASE("empty systems are rejected") {
  Matrix a(3, 0);
  std::vector<double> b{1, 2, 3};
  CHECK_THROWS_AS(nnls(a, b), Error);
}
