#include <doctest.h>

#include <cmath>

#include "qwp/error.hpp"
#include "qwp/preprocess.hpp"
#include "qwp/synthetic.hpp"
#include "test_util.hpp"

using namespace qwp;

TEST_CASE("two orthogonal rows: unit, center, unit") {
  Matrix x(2, 2);
  x << 2, 0, 0, 2;
  const Matrix y = normalize(x);
  const double h = std::sqrt(2.0) / 2.0;
  Matrix expected(2, 2);
  expected << h, -h, -h, h;
  CHECK((y - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("rows that collapse after centering name the token") {
  Matrix x(2, 2);
  x << 1, 0, 3, 0;
  CHECK_THROWS_AS(normalize(x), NumericalError);
  const EmbeddingMatrix e({"uno", "tres"}, x);
  try {
    normalize(e);
    FAIL("expected an error");
  } catch (const NumericalError& err) {
    CHECK(std::string(err.what()).find("'uno'") != std::string::npos);
  }
}

TEST_CASE("a zero row is rejected before centering") {
  Matrix x = Matrix::Identity(3, 3);
  x.row(1).setZero();
  const EmbeddingMatrix e({"a", "b", "c"}, x);
  try {
    normalize(e);
    FAIL("expected an error");
  } catch (const NumericalError& err) {
    const std::string what = err.what();
    CHECK(what.find("'b'") != std::string::npos);
    CHECK(what.find("unit length") != std::string::npos);
  }
}

TEST_CASE("unit-norm zero-mean input is a fixed point") {
  Matrix x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  CHECK((normalize(x) - x).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("outputs have unit rows, zero mean and are idempotent") {
  Rng rng(5);
  for (const Index d : {3, 20, 64}) {
    const Matrix x = gaussian_mixture(500, d, 4, 0.7, rng);
    const Matrix y = normalize(x);
    CHECK((y.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(y.colwise().mean().norm() <= 1e-12);
    const Matrix z = normalize(y);
    CHECK((z - y).rowwise().norm().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("the EmbeddingMatrix overload keeps the vocabulary") {
  Rng rng(2);
  const EmbeddingMatrix e({"a", "b", "c"}, qwp::test::random_matrix(3, 4, rng));
  const EmbeddingMatrix n = normalize(e);
  CHECK(n.vocab() == e.vocab());
  CHECK(n.vectors() == normalize(e.vectors()));
}

TEST_CASE("normalize_rows_in_place only rescales") {
  Matrix x(2, 2);
  x << 3, 4, 0, -2;
  normalize_rows_in_place(x);
  CHECK(x(0, 0) == doctest::Approx(0.6));
  CHECK(x(0, 1) == doctest::Approx(0.8));
  CHECK(x(1, 1) == -1.0);
}
