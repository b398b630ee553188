#include <doctest.h>

#include <cmath>

#include "qwp/error.hpp"
#include "qwp/procrustes.hpp"
#include "qwp/synthetic.hpp"
#include "test_util.hpp"

using namespace qwp;
using qwp::test::random_matrix;

namespace {

// Least-squares residual sum_i ||x_i W - y_i||^2, the form the trace
// objective is supposed to be equivalent to.
double residual(const Matrix& x, const Matrix& w, const Matrix& y) { return (x * w - y).squaredNorm(); }

}  // namespace

TEST_CASE("closed form recovers a planted rotation") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Matrix x = random_matrix(100, 20, rng);
    const Matrix r = random_orthogonal(20, rng);
    const OrthogonalMap w = procrustes_closed_form(x, x * r);
    CHECK((w.matrix() - r).norm() <= 1e-9);
  }
}

TEST_CASE("closed form small cases") {
  Rng rng(3);
  const Matrix x = random_matrix(30, 6, rng);
  CHECK((procrustes_closed_form(x, x).matrix() - Matrix::Identity(6, 6)).norm() <= 1e-9);

  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  const OrthogonalMap w = procrustes_closed_form(Matrix::Identity(2, 2), rot);
  CHECK((w.matrix() - rot).norm() <= 1e-12);
}

TEST_CASE("reflections are allowed") {
  Rng rng(4);
  const Matrix x = random_matrix(50, 5, rng);
  Matrix flip = Matrix::Identity(5, 5);
  flip(2, 2) = -1.0;
  const OrthogonalMap w = procrustes_closed_form(x, x * flip);
  CHECK((w.matrix() - flip).norm() <= 1e-9);
  CHECK(w.matrix().determinant() == doctest::Approx(-1.0));
}

TEST_CASE("row weights match duplicated rows") {
  Rng rng(5);
  const Matrix x = random_matrix(12, 4, rng);
  const Matrix y = random_matrix(12, 4, rng);
  Vector weights = Vector::Ones(12);
  weights[0] = 3.0;
  weights[7] = 2.0;
  Matrix xd(15, 4);
  Matrix yd(15, 4);
  xd << x, x.row(0), x.row(0), x.row(7);
  yd << y, y.row(0), y.row(0), y.row(7);
  const OrthogonalMap weighted = procrustes_closed_form(x, y, weights);
  const OrthogonalMap duplicated = procrustes_closed_form(xd, yd);
  CHECK((weighted.matrix() - duplicated.matrix()).norm() <= 1e-10);
}

TEST_CASE("closed form errors") {
  Rng rng(6);
  const Matrix x = random_matrix(5, 3, rng);
  CHECK_THROWS_AS(procrustes_closed_form(x, random_matrix(4, 3, rng)), DimensionError);
  CHECK_THROWS_AS(procrustes_closed_form(x, random_matrix(5, 2, rng)), DimensionError);
  Matrix bad = x;
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(procrustes_closed_form(bad, x), NumericalError);
  Vector w = Vector::Ones(5);
  w[2] = 0.0;
  CHECK_THROWS_AS(procrustes_closed_form(x, x, w), ConfigError);
  CHECK_THROWS_AS(procrustes_closed_form(x, x, Vector(Vector::Ones(4))), DimensionError);
}

TEST_CASE("closed form beats random orthogonal perturbations of itself") {
  Rng rng(7);
  const Matrix cx = random_matrix(15, 6, rng);
  const Matrix cy = random_matrix(15, 6, rng);
  Matrix plan = (random_matrix(15, 15, rng).array().abs()).matrix();
  plan /= plan.sum();
  const OrthogonalMap w =
      coupling_procrustes_update(OrthogonalMap::identity(6), cx, cy, plan, 0.0, UpdateMode::closed_form);
  const double best = alignment_objective(w, cx, plan, cy);
  for (int t = 0; t < 100; ++t) {
    // Small random rotation: nearest orthogonal to I + 0.1 G.
    const Matrix step = nearest_orthogonal(Matrix::Identity(6, 6) + 0.1 * random_matrix(6, 6, rng)).matrix();
    const OrthogonalMap other(w.matrix() * step);
    CHECK(alignment_objective(other, cx, plan, cy) <= best + 1e-9);
  }
}

TEST_CASE("trace objective and least squares differ by a map-independent constant") {
  Rng rng(8);
  const Matrix x = random_matrix(20, 5, rng);
  const Matrix y = random_matrix(20, 5, rng);
  const Matrix identity_plan = Matrix::Identity(20, 20);
  double constant = 0.0;
  for (int t = 0; t < 10; ++t) {
    const OrthogonalMap w(random_orthogonal(5, rng));
    const double sum = residual(x, w.matrix(), y) + 2.0 * alignment_objective(w, x, identity_plan, y);
    if (t == 0) constant = sum;
    CHECK(sum == doctest::Approx(constant).epsilon(1e-12));
  }
  CHECK(constant == doctest::Approx(x.squaredNorm() + y.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("coupling update with a permutation plan recovers the rotation") {
  Rng rng(9);
  const Matrix cx = random_matrix(30, 8, rng);
  const Matrix r = random_orthogonal(8, rng);
  const Matrix cy = cx * r;
  const Matrix plan = Matrix::Identity(30, 30) / 30.0;
  const OrthogonalMap w =
      coupling_procrustes_update(OrthogonalMap::identity(8), cx, cy, plan, 0.0, UpdateMode::closed_form);
  CHECK((w.matrix() - r).norm() <= 1e-9);
}

TEST_CASE("zero learning rate keeps the map") {
  Rng rng(10);
  const Matrix cx = random_matrix(10, 4, rng);
  const Matrix cy = random_matrix(10, 4, rng);
  const Matrix plan = Matrix::Constant(10, 10, 0.01);
  const OrthogonalMap w(random_orthogonal(4, rng));
  const OrthogonalMap next = coupling_procrustes_update(w, cx, cy, plan, 0.0, UpdateMode::gradient);
  CHECK((next.matrix() - w.matrix()).norm() <= 1e-9);
}

TEST_CASE("gradient steps do not decrease the trace objective on identical anchors") {
  Rng rng(11);
  const Matrix c = random_matrix(12, 4, rng);
  const Matrix plan = Matrix::Constant(12, 12, 1.0 / 144.0);
  OrthogonalMap w(random_orthogonal(4, rng));
  for (double lr : {0.1, 1.0, 10.0}) {
    const OrthogonalMap next = coupling_procrustes_update(w, c, c, plan, lr, UpdateMode::closed_form);
    CHECK(next.orthogonality_defect() <= 1e-6);
    CHECK(alignment_objective(next, c, plan, c) >= alignment_objective(w, c, plan, c) - 1e-12);
  }
  // Diagonal plan on identical anchors: the identity is optimal and gradient
  // steps move toward it.
  const Matrix diagonal = Matrix::Identity(12, 12) / 12.0;
  for (int t = 0; t < 5; ++t) {
    const OrthogonalMap next = coupling_procrustes_update(w, c, c, diagonal, 1.0, UpdateMode::gradient);
    CHECK(next.orthogonality_defect() <= 1e-6);
    CHECK(alignment_objective(next, c, diagonal, c) >= alignment_objective(w, c, diagonal, c) - 1e-12);
    w = next;
  }
}

TEST_CASE("coupling update errors") {
  Rng rng(12);
  const Matrix cx = random_matrix(6, 3, rng);
  const Matrix cy = random_matrix(5, 3, rng);
  const auto w = OrthogonalMap::identity(3);
  CHECK_THROWS_AS(coupling_procrustes_update(w, cx, cy, Matrix::Zero(6, 6), 0.1, UpdateMode::gradient),
                  DimensionError);
  CHECK_THROWS_AS(coupling_procrustes_update(OrthogonalMap::identity(4), cx, cy, Matrix::Zero(6, 5), 0.1,
                                             UpdateMode::gradient),
                  DimensionError);
  Matrix plan = Matrix::Constant(6, 5, 1.0 / 30.0);
  plan(0, 0) = std::nan("");
  CHECK_THROWS_AS(coupling_procrustes_update(w, cx, cy, plan, 0.1, UpdateMode::gradient), NumericalError);
  CHECK_THROWS_AS(coupling_procrustes_update(w, cx, cy, Matrix::Constant(6, 5, 0.01), -1.0, UpdateMode::gradient),
                  ConfigError);
}

TEST_CASE("orthogonal map construction checks the defect") {
  CHECK_THROWS_AS(OrthogonalMap(Matrix::Constant(3, 3, 1.0)), NumericalError);
  CHECK_THROWS_AS(OrthogonalMap(Matrix::Identity(3, 2)), NumericalError);
  CHECK_NOTHROW(OrthogonalMap(Matrix::Identity(4, 4)));
  CHECK(OrthogonalMap::unchecked(2.0 * Matrix::Identity(2, 2)).orthogonality_defect() == doctest::Approx(std::sqrt(18.0)));
  CHECK_THROWS_AS(nearest_orthogonal(Matrix::Zero(2, 3)), DimensionError);
}
