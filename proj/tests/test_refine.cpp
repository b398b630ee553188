#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "qwp/align.hpp"
#include "qwp/error.hpp"
#include "qwp/procrustes.hpp"
#include "qwp/refine.hpp"
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

RefineConfig config_with(std::vector<std::size_t> schedule, Retrieval retrieval = Retrieval::csls) {
  RefineConfig c;
  c.epochs = static_cast<int>(schedule.size());
  c.dict_vocab_schedule = std::move(schedule);
  c.retrieval = retrieval;
  return c;
}

}  // namespace

TEST_CASE("refine config validation") {
  RefineConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RefineConfig{};
  c.dict_vocab_schedule = {10, 5, 20, 30, 40};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.dict_vocab_schedule = {0, 5, 20, 30, 40};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RefineConfig{};
  c.csls_knn = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RefineConfig{};
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("exact images pair each row with itself") {
  Rng rng(1);
  const Matrix x = random_matrix(40, 6, rng);
  const OrthogonalMap w(random_orthogonal(6, rng));
  const Matrix y = x * w.matrix();
  for (Retrieval method : {Retrieval::nn, Retrieval::csls}) {
    const auto pairs = induce_dictionary(x, y, w, config_with({25, 40}, method), 0);
    REQUIRE(pairs.size() == 25);
    for (Index i = 0; i < 25; ++i) CHECK(pairs[static_cast<std::size_t>(i)] == std::make_pair(i, i));
  }
  const auto wide = induce_dictionary(x, y, w, config_with({25, 100}), 1);
  CHECK(wide.size() == 40);  // window clamped to the available rows
  CHECK_THROWS_AS(induce_dictionary(x, y, w, config_with({25, 40}), 2), ConfigError);
}

TEST_CASE("mutual filter keeps only the mutual pair") {
  Matrix x(3, 2);
  x << 1.0, 0.0, 0.9, 0.1, 0.0, 1.0;  // rows 0 and 1 both point at target 0
  Matrix y(3, 2);
  y << 1.0, 0.0, -1.0, 0.2, 0.0, 1.0;
  RefineConfig c = config_with({3}, Retrieval::nn);
  const auto mutual = induce_dictionary(x, y, OrthogonalMap::identity(2), c, 0);
  CHECK(mutual == IndexPairs{{0, 0}, {2, 2}});
  c.mutual_only = false;
  const auto all = induce_dictionary(x, y, OrthogonalMap::identity(2), c, 0);
  CHECK(all == IndexPairs{{0, 0}, {1, 0}, {2, 2}});
}

TEST_CASE("nn without mutual filtering pairs every source exactly once") {
  Rng rng(2);
  const Matrix x = random_matrix(50, 5, rng);
  const Matrix y = random_matrix(60, 5, rng);
  RefineConfig c = config_with({30}, Retrieval::nn);
  c.mutual_only = false;
  const auto pairs = induce_dictionary(x, y, OrthogonalMap::identity(5), c, 0);
  REQUIRE(pairs.size() == 30);
  std::set<Index> sources;
  for (const auto& [i, j] : pairs) {
    sources.insert(i);
    CHECK(j < 30);
  }
  CHECK(sources.size() == 30);
}

TEST_CASE("csls demotes a hub target") {
  // Sources are basis vectors e_0..e_9. Target i sits at cosine 0.25 to e_i and
  // is orthogonal to every other source; the hub is the normalized sum of the
  // sources, at cosine 1/sqrt(10) = 0.316 to each. With knn = 3 the CSLS score
  // of target i is 2(0.25) - 0.25/3 = 0.417 against 0.316 for the hub, while
  // plain cosine prefers the hub everywhere.
  const Index n = 10;
  const Index d = 2 * n;
  const double own = 0.25;
  const Matrix x = Matrix::Identity(n, d);
  Matrix y = Matrix::Zero(n + 1, d);
  for (Index i = 0; i < n; ++i) {
    y(i, i) = own;
    y(i, n + i) = std::sqrt(1.0 - own * own);
  }
  y.row(n).head(n).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  const Index hub = n;

  auto targets = [&](Retrieval method) {
    RefineConfig c = config_with({static_cast<std::size_t>(n + 1)}, method);
    c.mutual_only = false;
    c.csls_knn = 3;
    std::vector<Index> out;
    for (const auto& pair : induce_dictionary(x, y, OrthogonalMap::identity(d), c, 0)) out.push_back(pair.second);
    return out;
  };
  const auto nn = targets(Retrieval::nn);
  const auto csls = targets(Retrieval::csls);
  REQUIRE(nn.size() == static_cast<std::size_t>(n));
  REQUIRE(csls.size() == static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    CHECK(nn[static_cast<std::size_t>(i)] == hub);
    CHECK(csls[static_cast<std::size_t>(i)] == i);
  }
}

TEST_CASE("refine keeps an exact map and zero epochs change nothing") {
  SyntheticPairConfig sc;
  sc.n = 400;
  sc.dim = 10;
  sc.noise = 0.0;
  sc.shuffle_block = 100;
  const auto pair = make_synthetic_pair(sc);
  const OrthogonalMap exact(pair.rotation);
  const auto result = refine(pair.src.vectors(), pair.tgt.vectors(), exact, config_with({200, 300, 400}));
  CHECK((result.map.matrix() - pair.rotation).norm() <= 1e-6);
  CHECK(result.dictionary_sizes == std::vector<std::size_t>{200, 300, 400});

  RefineConfig none = config_with({200});
  none.epochs = 0;
  Rng rng(4);
  const OrthogonalMap start(random_orthogonal(10, rng));
  const auto unchanged = refine(pair.src.vectors(), pair.tgt.vectors(), start, none);
  CHECK(unchanged.map.matrix() == start.matrix());
  CHECK(unchanged.dictionary_sizes.empty());
}

TEST_CASE("refine output is orthogonal and dictionaries follow the schedule") {
  SyntheticPairConfig sc;
  sc.n = 500;
  sc.dim = 12;
  sc.noise = 0.05;
  sc.shuffle_block = 100;
  const auto pair = make_synthetic_pair(sc);
  Rng rng(5);
  // A rough start: the planted rotation, perturbed and re-projected.
  const Matrix rough = pair.rotation + 0.1 * random_matrix(12, 12, rng);
  const OrthogonalMap start = procrustes_closed_form(Matrix::Identity(12, 12), rough);
  const auto result = refine(pair.src.vectors(), pair.tgt.vectors(), start, config_with({200, 300, 400, 500}));
  CHECK(result.map.orthogonality_defect() <= 1e-6);
  REQUIRE(result.dictionary_sizes.size() == 4);
  for (std::size_t e = 1; e < 4; ++e) CHECK(result.dictionary_sizes[e] >= result.dictionary_sizes[e - 1]);
  CHECK(precision_at_1(pair, result.map) >= precision_at_1(pair, start));
}

TEST_CASE("refinement after a truncated alignment helps") {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticPairConfig sc;
    sc.n = 1000;
    sc.dim = 20;
    sc.shuffle_block = 250;
    sc.seed = seed;
    const auto pair = make_synthetic_pair(sc);
    AlignConfig c;
    c.k = 50;
    c.epochs = 1;
    c.iters_per_epoch = 20;
    c.train_vocab = 1000;
    c.init_vocab = 250;
    c.seed = seed;
    const auto aligned = align(pair.src, pair.tgt, c).map;
    RefineConfig rc = config_with({1000, 1000, 1000, 1000, 1000});
    const auto refined = refine(pair.src.vectors(), pair.tgt.vectors(), aligned, rc).map;
    const double before = precision_at_1(pair, aligned);
    const double after = precision_at_1(pair, refined);
    CHECK(after >= before - 0.005);
    if (after > before) ++improved;
  }
  CHECK(improved >= 16);
}
