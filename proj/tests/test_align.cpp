#include <doctest.h>

#include <numeric>
#include <set>

#include "qwp/align.hpp"
#include "qwp/error.hpp"
#include "qwp/preprocess.hpp"
#include "qwp/procrustes.hpp"
#include "qwp/retrieval.hpp"
#include "qwp/synthetic.hpp"
#include "test_util.hpp"

using namespace qwp;
using qwp::test::random_matrix;

namespace {

double precision_at_1(const SyntheticPair& pair, const OrthogonalMap& w) {
  std::vector<Index> rows(pair.src.size());
  std::iota(rows.begin(), rows.end(), Index{0});
  const auto ranked = retrieve(rows, pair.src.vectors(), pair.tgt.vectors(), w, 1, RetrievalOptions{});
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) hits += ranked[i][0] == pair.target_of_source[i];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

AlignConfig small_config(std::size_t n) {
  AlignConfig c;
  c.k = 40;
  c.epochs = 2;
  c.iters_per_epoch = 5;
  c.train_vocab = n;
  c.init_vocab = std::min<std::size_t>(n, 100);
  c.fw_iters = 10;
  return c;
}

SyntheticPair small_pair(std::uint64_t seed) {
  SyntheticPairConfig sc;
  sc.n = 300;
  sc.dim = 8;
  sc.clusters = 5;
  sc.shuffle_block = 100;
  sc.seed = seed;
  return make_synthetic_pair(sc);
}

}  // namespace

TEST_CASE("mode names round-trip") {
  CHECK(parse_sampling(to_string(Sampling::random)) == Sampling::random);
  CHECK(parse_sampling(to_string(Sampling::kmeanspp)) == Sampling::kmeanspp);
  CHECK(parse_ot_mode(to_string(OtMode::unbalanced)) == OtMode::unbalanced);
  CHECK(parse_fw_step(to_string(FwStep::open_loop)) == FwStep::open_loop);
  CHECK(parse_fw_step(to_string(FwStep::line_search)) == FwStep::line_search);
  CHECK_THROWS_AS(parse_sampling("kmeans"), ConfigError);
  CHECK_THROWS_AS(parse_ot_mode("partial"), ConfigError);
  CHECK_THROWS_AS(parse_fw_step("exact"), ConfigError);
}

TEST_CASE("config validation") {
  AlignConfig c;
  CHECK_NOTHROW(c.validate());
  c.k = c.train_vocab + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AlignConfig{};
  c.init_vocab = c.train_vocab + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AlignConfig{};
  c.iters_per_epoch = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AlignConfig{};
  c.sinkhorn.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  Rng rng(1);
  const Matrix x = random_matrix(50, 4, rng);
  AlignConfig too_big = small_config(60);
  too_big.k = 10;
  CHECK_THROWS_AS(align(x, x, too_big), ConfigError);
  CHECK_THROWS_AS(align(x, random_matrix(50, 3, rng), small_config(50)), DimensionError);
}

// Heads are a frequency-ranked slice of a centered space and are not
// themselves centered. On an exactly centered head the uniform coupling already
// has objective zero and Frank-Wolfe has nothing to move along.
TEST_CASE("convex_init on identical heads is the identity") {
  Rng rng(2);
  const Matrix x = normalize(random_matrix(400, 6, rng)).topRows(120);
  const OrthogonalMap q = convex_init(x, x, 20);
  CHECK((q.matrix() - Matrix::Identity(6, 6)).norm() <= 1e-6);
}

TEST_CASE("convex_init recovers a rotation of Gaussian data") {
  Rng rng(3);
  const Matrix x = random_matrix(500, 20, rng);
  const Matrix r = random_orthogonal(20, rng);
  const OrthogonalMap q = convex_init(x, x * r, 50);
  CHECK((q.matrix() - r).norm() <= 0.1);
}

TEST_CASE("convex_init with zero iterations maps the independence coupling") {
  Rng rng(4);
  const Matrix x = random_matrix(30, 4, rng);
  const Matrix y = random_matrix(30, 4, rng);
  const OrthogonalMap q = convex_init(x, y, 0);
  // X^T (11^T / n^2) Y = mean(x)^T mean(y) has rank one; its polar factor is
  // pinned only on the mean direction, which it sends to the target mean.
  const Eigen::RowVectorXd mx = x.colwise().mean().normalized();
  const Eigen::RowVectorXd my = y.colwise().mean().normalized();
  CHECK((mx * q.matrix() - my).norm() <= 1e-9);
  CHECK_THROWS_AS(convex_init(x, y.topRows(10), 5), DimensionError);
}

TEST_CASE("line search reaches a lower relaxed objective than the open-loop schedule") {
  SyntheticPairConfig sc;
  sc.n = 1000;
  sc.dim = 10;
  sc.clusters = 5;
  sc.shuffle_block = 200;
  const auto pair = make_synthetic_pair(sc);
  const Matrix x = pair.src.vectors().topRows(200);
  const Matrix y = pair.tgt.vectors().topRows(200);
  const OrthogonalMap exact = convex_init(x, y, 40, FwStep::line_search);
  const OrthogonalMap open = convex_init(x, y, 40, FwStep::open_loop);
  CHECK(precision_at_1(pair, exact) >= precision_at_1(pair, open));
  CHECK((exact.matrix() - pair.rotation).norm() < (open.matrix() - pair.rotation).norm());
}

TEST_CASE("random anchors are distinct rows with uniform weights") {
  Rng rng(5);
  const Matrix x = random_matrix(40, 3, rng);
  const auto anchors = random_anchors(x, 10, 9);
  CHECK(anchors.weights.isApprox(Vector::Constant(10, 0.1)));
  std::set<Index> seen;
  for (Index a = 0; a < 10; ++a) {
    Index match = -1;
    for (Index i = 0; i < 40; ++i) {
      if (x.row(i) == anchors.centers.row(a)) match = i;
    }
    REQUIRE(match >= 0);
    seen.insert(match);
  }
  CHECK(seen.size() == 10);
  CHECK(random_anchors(x, 10, 9).centers == anchors.centers);
  CHECK_THROWS_AS(random_anchors(x, 41, 0), ConfigError);
  CHECK_THROWS_AS(random_anchors(x, 0, 0), ConfigError);
}

TEST_CASE("k = n on identical clouds matches every anchor to itself") {
  Rng rng(6);
  const Matrix x = normalize(random_matrix(20, 5, rng));
  AlignConfig c = small_config(20);
  c.k = 20;
  const auto estimate = quantized_wasserstein_plan(x, x, OrthogonalMap::identity(5), c, 17, 17);
  REQUIRE(estimate.source.centers.rows() == 20);
  // Zero-diagonal cost: the exact plan is the identity matching.
  CHECK(estimate.cost.diagonal().cwiseAbs().maxCoeff() == 0.0);
  const auto exact = exact_ot(estimate.cost, estimate.source.weights, estimate.target.weights);
  for (Index i = 0; i < 20; ++i) {
    Index best = 0;
    estimate.plan.matrix.row(i).maxCoeff(&best);
    CHECK(best == i);
    CHECK(exact.matrix(i, i) == doctest::Approx(0.05));
  }
}

TEST_CASE("k-means++ anchors give a cheaper plan than random anchors on a two-cluster toy set") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, 99));
    // Two equally likely blobs; six anchors per side.
    auto cloud = [&rng](Index n) {
      Matrix m(n, 2);
      for (Index i = 0; i < n; ++i) {
        const bool far = rng.uniform() < 0.5;
        m(i, 0) = (far ? 1.5 : 0.0) + 0.1 * rng.normal();
        m(i, 1) = 0.1 * rng.normal();
      }
      return m;
    };
    const Matrix x = cloud(200);
    const Matrix y = cloud(200);
    AlignConfig c = small_config(200);
    c.k = 6;
    c.sampling = Sampling::kmeanspp;
    const auto quantized = quantized_wasserstein_plan(x, y, OrthogonalMap::identity(2), c, seed, seed + 1000);
    c.sampling = Sampling::random;
    const auto sampled = quantized_wasserstein_plan(x, y, OrthogonalMap::identity(2), c, seed, seed + 1000);
    if (transport_cost(quantized.cost, quantized.plan.matrix) <= transport_cost(sampled.cost, sampled.plan.matrix)) {
      ++wins;
    }
  }
  CHECK(wins >= 70);
}

TEST_CASE("epoch anchor cache equals anchors recomputed on the mapped cloud") {
  const auto pair = small_pair(7);
  const AlignConfig c = small_config(300);
  int checked = 0;
  align(pair.src, pair.tgt, c, [&](const IterationView& view) {
    const auto fresh = quantized_wasserstein_plan(pair.src.vectors(), pair.tgt.vectors(), view.map_before, c,
                                                  view.src_seed, view.tgt_seed);
    CHECK((fresh.cost - view.cost).cwiseAbs().maxCoeff() <= 1e-9);
    ++checked;
  });
  CHECK(checked == c.epochs * c.iters_per_epoch);
}

TEST_CASE("every update stays orthogonal and the trace is filled") {
  const auto pair = small_pair(8);
  AlignConfig c = small_config(300);
  for (OtMode mode : {OtMode::balanced, OtMode::unbalanced}) {
    c.ot = mode;
    double worst = 0.0;
    const auto result = align(pair.src, pair.tgt, c, [&](const IterationView& view) {
      worst = std::max(worst, view.map_after.orthogonality_defect());
    });
    CHECK(worst <= 1e-6);
    CHECK(result.trace.max_orthogonality_defect <= 1e-6);
    CHECK(result.trace.iteration_cost.size() == 10);
    CHECK(result.trace.epoch_mean_cost.size() == 2);
    CHECK(result.trace.solver_calls == 10);
  }
}

TEST_CASE("zero epochs return the convex initialization") {
  const auto pair = small_pair(9);
  AlignConfig c = small_config(300);
  c.epochs = 0;
  const auto result = align(pair.src, pair.tgt, c);
  const auto init = convex_init(pair.src.vectors().topRows(100), pair.tgt.vectors().topRows(100), c.fw_iters);
  CHECK(result.map.matrix() == init.matrix());
  CHECK(result.trace.solver_calls == 0);
}

TEST_CASE("same seed, same map") {
  const auto pair = small_pair(10);
  AlignConfig c = small_config(300);
  const auto a = align(pair.src, pair.tgt, c);
  const auto b = align(pair.src, pair.tgt, c);
  CHECK(a.map.matrix() == b.map.matrix());
  c.seed = 1;
  const auto other = align(pair.src, pair.tgt, c);
  CHECK(other.map.matrix() != a.map.matrix());
}

TEST_CASE("random sampling bypasses quantization; caching quantizes once per epoch") {
  const auto pair = small_pair(11);
  AlignConfig c = small_config(300);
  c.sampling = Sampling::random;
  auto trace = align(pair.src, pair.tgt, c).trace;
  CHECK(trace.quantize_calls == 0);
  CHECK(trace.random_anchor_calls == 2 * c.epochs);

  c.sampling = Sampling::kmeanspp;
  trace = align(pair.src, pair.tgt, c).trace;
  CHECK(trace.quantize_calls == 2 * c.epochs);
  CHECK(trace.random_anchor_calls == 0);

  c.requantize_each_iter = true;
  trace = align(pair.src, pair.tgt, c).trace;
  CHECK(trace.quantize_calls == 2 * c.epochs * c.iters_per_epoch);
}

TEST_CASE("closed-form last epoch switches the update rule") {
  const auto pair = small_pair(12);
  AlignConfig c = small_config(300);
  c.final_closed_form = true;
  int checked = 0;
  align(pair.src, pair.tgt, c, [&](const IterationView& view) {
    if (view.epoch + 1 != c.epochs) return;
    const auto anchors = quantized_wasserstein_plan(pair.src.vectors(), pair.tgt.vectors(), view.map_before, c,
                                                    view.src_seed, view.tgt_seed);
    const auto expected = coupling_procrustes_update(view.map_before, anchors.source.centers, anchors.target.centers,
                                                     view.plan.matrix, 0.0, UpdateMode::closed_form);
    CHECK((expected.matrix() - view.map_after.matrix()).norm() <= 1e-9);
    ++checked;
  });
  CHECK(checked == c.iters_per_epoch);
}

TEST_CASE("noiseless rotated and permuted copy is recovered") {
  SyntheticPairConfig sc;
  sc.noise = 0.0;
  const auto pair = make_synthetic_pair(sc);
  AlignConfig c;
  c.k = 300;
  c.epochs = 5;
  c.iters_per_epoch = 50;
  c.train_vocab = 3000;
  c.init_vocab = 500;
  const auto result = align(pair.src, pair.tgt, c);
  CHECK(precision_at_1(pair, result.map) >= 0.99);
}

// W settles inside the first epoch (large early steps); later epoch means then
// move with the anchor redraws rather than with W.
TEST_CASE("transport cost falls from an uninformative start and then stays level") {
  SyntheticPairConfig sc;
  sc.n = 1000;
  sc.dim = 20;
  sc.shuffle_block = 250;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sc.seed = seed;
    const auto pair = make_synthetic_pair(sc);
    AlignConfig c;
    c.k = 100;
    c.epochs = 5;
    c.iters_per_epoch = 50;
    c.train_vocab = 1000;
    c.init_vocab = 250;
    c.fw_iters = 0;
    c.seed = seed;
    const auto trace = align(pair.src, pair.tgt, c).trace;
    const auto& means = trace.epoch_mean_cost;
    REQUIRE(means.size() == 5);
    CHECK(means.back() < 0.8 * trace.iteration_cost.front());
    for (std::size_t e = 1; e < means.size(); ++e) CHECK(means[e] <= 1.1 * means.front());
  }
}
