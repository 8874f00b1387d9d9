#include <doctest.h>

#include <cmath>

#include "amde/error.hpp"
#include "amde/eval.hpp"
#include "amde/rng.hpp"
#include "oracles.hpp"

using namespace amde;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> d(shape_numel(shape));
  for (double& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d));
}

// Builds a RankingResult whose i-th ranked item is relevant iff i+1 appears
// in hit_ranks (1-based).
RankingResult synthetic_result(int gallery, std::initializer_list<int> hit_ranks) {
  RankingResult r;
  r.order.resize(static_cast<std::size_t>(gallery));
  r.relevance.assign(static_cast<std::size_t>(gallery), false);
  for (int i = 0; i < gallery; ++i) r.order[static_cast<std::size_t>(i)] = i;
  for (int rank : hit_ranks) r.relevance[static_cast<std::size_t>(rank - 1)] = true;
  return r;
}

}  // namespace

TEST_CASE("rank_gallery: exact copy wins, singleton, dimension error") {
  Tensor query = Tensor::from_data({3}, {0.5, -1.0, 2.0});
  Tensor gallery = Tensor::from_data({3, 3}, {9, 9, 9, 0.5, -1.0, 2.0, 1, 1, 1});
  auto order = rank_gallery(query, gallery);
  CHECK(order[0] == 1);

  Tensor single = Tensor::from_data({1, 3}, {7, 7, 7});
  auto one = rank_gallery(query, single);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 0);

  CHECK_THROWS_AS(rank_gallery(query, Tensor::zeros({2, 4})), Error);
}

TEST_CASE("rank_gallery matches the exhaustive-sort oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int g = 1 + static_cast<int>(rng.below(20));
    const int d = 1 + static_cast<int>(rng.below(6));
    Tensor query = random_tensor({d}, rng);
    Tensor gallery = random_tensor({g, d}, rng);
    auto got = rank_gallery(query, gallery);
    auto expect = oracle::rank(query.data(), gallery.data(), d, g);
    CHECK(got == expect);
  }
}

TEST_CASE("rank_gallery breaks distance ties by lower index") {
  Tensor query = Tensor::from_data({2}, {0.0, 0.0});
  Tensor gallery = Tensor::from_data({4, 2}, {1, 0, 0, 1, -1, 0, 0.5, 0});
  auto order = rank_gallery(query, gallery);
  // distances: 1, 1, 1, 0.25 -> index 3 first, then 0, 1, 2 by tie-break.
  CHECK(order == std::vector<int>{3, 0, 1, 2});
}

TEST_CASE("cmc at k: perfect retrieval, exhaustion, manual instance") {
  std::vector<RankingResult> perfect{synthetic_result(5, {1}), synthetic_result(5, {1, 4})};
  CHECK(cmc_at_k(perfect, 1) == 1.0);

  std::vector<RankingResult> hand{synthetic_result(4, {1}), synthetic_result(4, {3}),
                                  synthetic_result(4, {2})};
  CHECK(cmc_at_k(hand, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(cmc_at_k(hand, 2) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(cmc_at_k(hand, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cmc_at_k(hand, 4) == 1.0);  // k = G exhausts the gallery

  CHECK_THROWS_AS(cmc_at_k(hand, 0), Error);
}

TEST_CASE("cmc is non-decreasing in k and hits 1 at k = G") {
  Rng rng(9);
  std::vector<RankingResult> results;
  const int g = 12;
  for (int q = 0; q < 8; ++q) {
    RankingResult r;
    r.order.resize(g);
    r.relevance.assign(g, false);
    for (int i = 0; i < g; ++i) r.order[static_cast<std::size_t>(i)] = i;
    // At least one relevant item somewhere.
    r.relevance[rng.below(g)] = true;
    if (rng.uniform() < 0.5) r.relevance[rng.below(g)] = true;
    results.push_back(std::move(r));
  }
  double prev = 0.0;
  for (int k = 1; k <= g; ++k) {
    const double c = cmc_at_k(results, k);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("average precision analytic cases") {
  std::vector<RankingResult> first{synthetic_result(6, {1})};
  CHECK(mean_average_precision(first) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<RankingResult> second{synthetic_result(6, {2})};
  CHECK(mean_average_precision(second) == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<RankingResult> two{synthetic_result(6, {1, 3})};
  CHECK(mean_average_precision(two) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("map agrees with the enumeration oracle and stays in [0, 1]") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int queries = 1 + static_cast<int>(rng.below(10));
    const int g = 2 + static_cast<int>(rng.below(19));
    std::vector<RankingResult> results;
    std::vector<std::vector<bool>> flags;
    for (int q = 0; q < queries; ++q) {
      RankingResult r;
      r.order.resize(static_cast<std::size_t>(g));
      r.relevance.assign(static_cast<std::size_t>(g), false);
      for (int i = 0; i < g; ++i) r.order[static_cast<std::size_t>(i)] = i;
      r.relevance[rng.below(static_cast<std::uint64_t>(g))] = true;
      for (int i = 0; i < g; ++i)
        if (rng.uniform() < 0.2) r.relevance[static_cast<std::size_t>(i)] = true;
      flags.emplace_back(r.relevance);
      results.push_back(std::move(r));
    }
    const double got_map = mean_average_precision(results);
    const double expect_map = oracle::mean_average_precision(flags);
    CHECK(got_map == doctest::Approx(expect_map).epsilon(1e-12));
    CHECK(got_map >= 0.0);
    CHECK(got_map <= 1.0);
    for (int k = 1; k <= g; ++k)
      CHECK(cmc_at_k(results, k) == doctest::Approx(oracle::cmc_at_k(flags, k)).epsilon(1e-12));
  }
}

TEST_CASE("map is 1 exactly when every relevant item precedes every irrelevant one") {
  std::vector<RankingResult> perfect{synthetic_result(5, {1, 2}), synthetic_result(5, {1})};
  CHECK(mean_average_precision(perfect) == 1.0);
  std::vector<RankingResult> flawed{synthetic_result(5, {1, 3})};
  CHECK(mean_average_precision(flawed) < 1.0);
}

TEST_CASE("evaluation rejects queries without relevant items") {
  RankingResult empty;
  empty.order = {0, 1};
  empty.relevance = {false, false};
  std::vector<RankingResult> results{empty};
  try {
    cmc_at_k(results, 1);
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
  CHECK_THROWS_AS(mean_average_precision(results), Error);
}

TEST_CASE("evaluation is invariant under rigid translation of all embeddings") {
  Rng rng(23);
  Tensor query = random_tensor({4}, rng);
  Tensor gallery = random_tensor({8, 4}, rng);
  auto base = rank_gallery(query, gallery);

  Tensor q2 = query.clone();
  Tensor g2 = gallery.clone();
  for (int j = 0; j < 4; ++j) {
    q2.mutable_data()[static_cast<std::size_t>(j)] += 3.7;
    for (int i = 0; i < 8; ++i) g2.mutable_data()[static_cast<std::size_t>(i) * 4 + j] += 3.7;
  }
  CHECK(rank_gallery(q2, g2) == base);
}

TEST_CASE("metrics csv rendering is byte-stable") {
  MetricsRow row;
  row.variant = "RNLSTM_A";
  row.seed = "3";
  row.s = 0.3;
  row.rank1 = 0.96875;
  row.rank5 = 1.0;
  row.map = 0.912345678;
  row.loss_final = 1.5;
  row.clamp_events = 7;
  const std::string got = metrics_csv_string(std::vector<MetricsRow>{row});
  CHECK(got ==
        "variant,seed,s,rank1,rank5,map,loss_final,clamp_events\n"
        "RNLSTM_A,3,0.3000,0.968750,1.000000,0.912346,1.500000,7\n");
}
