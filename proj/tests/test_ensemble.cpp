#include "megclass/ensemble.hpp"
#include "megclass/error.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace megclass;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

SentenceVote sv(int top, double gap) { return {"d", 0, top, gap, 0.0}; }

Mat to_mat(const oracle::Rows& rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

std::vector<Vec> to_vecs(const oracle::Rows& rows) {
  std::vector<Vec> out;
  for (const auto& r : rows) out.push_back(Eigen::Map<const Vec>(r.data(), static_cast<Eigen::Index>(r.size())));
  return out;
}

oracle::Rows random_rows(std::mt19937_64& rng, std::size_t n, std::size_t h) {
  std::normal_distribution<double> nd(0.0, 1.0);
  oracle::Rows rows(n, oracle::Row(h));
  for (auto& r : rows)
    for (double& x : r) x = nd(rng);
  return rows;
}

}  // namespace

TEST_CASE("vote") {
  const std::vector<Vec> two = {v3(1, 0, 0), v3(0, 1, 0)};
  SUBCASE("colinear with the first class") {
    const Vote v = vote(v3(2, 0, 0), two);
    CHECK(v.top_class == 0);
    CHECK(v.gap == doctest::Approx(1.0));
  }
  SUBCASE("equidistant picks the lowest id") {
    const Vote v = vote(v3(1, 1, 0), two);
    CHECK(v.top_class == 0);
    CHECK(v.gap == doctest::Approx(0.0));
  }
  SUBCASE("three classes with cosines 0.9, 0.6, 0.1") {
    // Unit class vectors chosen so cos(e1, c_k) equals the target value.
    auto unit_with = [](double c) { return v3(c, std::sqrt(1.0 - c * c), 0.0); };
    const std::vector<Vec> classes = {unit_with(0.6), unit_with(0.9), unit_with(0.1)};
    const Vote v = vote(v3(1, 0, 0), classes);
    CHECK(v.top_class == 1);
    CHECK(v.gap == doctest::Approx(0.3));
  }
  SUBCASE("zero vector") { CHECK_THROWS_AS(vote(v3(0, 0, 0), two), NumericalError); }
  SUBCASE("one class") { CHECK_THROWS_AS(vote(v3(1, 0, 0), {v3(1, 0, 0)}), ConfigError); }
}

TEST_CASE("document distribution") {
  SUBCASE("worked example: two science votes and one politics vote") {
    const auto d = document_distribution({sv(0, 0.8), sv(0, 0.1), sv(1, 0.1)}, 2);
    CHECK(d.probs[0] == doctest::Approx(0.9));
    CHECK(d.probs[1] == doctest::Approx(0.1));
  }
  SUBCASE("single sentence is one-hot") {
    const auto d = document_distribution({sv(2, 0.4)}, 3);
    CHECK(d.probs == std::vector<double>{0.0, 0.0, 1.0});
  }
  SUBCASE("all gaps zero counts votes") {
    const auto d = document_distribution({sv(0, 0.0), sv(1, 0.0), sv(1, 0.0), sv(1, 0.0)}, 2);
    CHECK(d.probs[0] == doctest::Approx(0.25));
    CHECK(d.probs[1] == doctest::Approx(0.75));
  }
  SUBCASE("no votes") { CHECK_THROWS_AS(document_distribution({}, 2), DataError); }
}

TEST_CASE("attention-weighted distribution") {
  const std::vector<SentenceVote> votes = {sv(0, 0.3), sv(1, 0.1)};
  SUBCASE("product rule") {
    const auto d = document_distribution_weighted(votes, {0.5, 0.5}, 2);
    CHECK(d.probs[0] == doctest::Approx(0.75));
    CHECK(d.probs[1] == doctest::Approx(0.25));
  }
  SUBCASE("uniform alpha reduces to the unweighted rule") {
    const std::vector<SentenceVote> more = {sv(0, 0.2), sv(1, 0.5), sv(2, 0.05), sv(1, 0.0)};
    const auto a = document_distribution_weighted(more, {0.25, 0.25, 0.25, 0.25}, 3);
    const auto b = document_distribution(more, 3);
    for (int k = 0; k < 3; ++k) CHECK(a.probs[static_cast<std::size_t>(k)] == doctest::Approx(b.probs[static_cast<std::size_t>(k)]));
  }
  SUBCASE("one-hot alpha") {
    const auto d = document_distribution_weighted(votes, {0.0, 1.0}, 2);
    CHECK(d.probs == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("vanishing products fall back to alpha") {
    const auto d = document_distribution_weighted({sv(0, 0.0), sv(1, 0.0)}, {0.2, 0.8}, 2);
    CHECK(d.probs[1] == doctest::Approx(0.8));
  }
}

TEST_CASE("ablation weights") {
  std::mt19937_64 rng(3);
  SUBCASE("equal") {
    const Mat s = to_mat(random_rows(rng, 4, 5));
    const auto w = ablation_weights(WeightMode::kEqual, s, {});
    CHECK(w == std::vector<double>(4, 0.25));
  }
  SUBCASE("last sentence has no centrality") {
    const oracle::Rows rows = {{1, 0.2, 0}, {0.9, 0.1, 0.1}, {1, 0, 0}};
    const auto w = centrality_weights(to_mat(rows));
    CHECK(w[2] == 0.0);
    const auto expect = oracle::centrality(rows);
    for (std::size_t j = 0; j < 3; ++j) CHECK(w[j] == doctest::Approx(expect[j]).epsilon(1e-12));
  }
  SUBCASE("centrality against pairwise cosines") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto rows = random_rows(rng, 2 + static_cast<std::size_t>(trial % 6), 4);
      const auto w = centrality_weights(to_mat(rows));
      const auto expect = oracle::centrality(rows);
      for (std::size_t j = 0; j < rows.size(); ++j) CHECK(w[j] == doctest::Approx(expect[j]).epsilon(1e-12));
    }
  }
  SUBCASE("both is the renormalized product") {
    const auto rows = random_rows(rng, 5, 4);
    const Mat s = to_mat(rows);
    const std::vector<Vec> classes = to_vecs(random_rows(rng, 3, 4));
    const auto votes = vote_document("d", s, classes);
    const auto c = ablation_weights(WeightMode::kCentrality, s, votes);
    const auto g = ablation_weights(WeightMode::kDiscriminative, s, votes);
    const auto b = ablation_weights(WeightMode::kBoth, s, votes);
    std::vector<double> prod(5);
    for (std::size_t j = 0; j < 5; ++j) prod[j] = c[j] * g[j];
    const double total = std::accumulate(prod.begin(), prod.end(), 0.0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(b[j] == doctest::Approx(total > 0 ? prod[j] / total : 0.2));
  }
}

TEST_CASE("ensemble matches the brute-force oracle") {
  std::mt19937_64 rng(11);
  for (int doc = 0; doc < 300; ++doc) {
    const std::size_t classes_n = 2 + static_cast<std::size_t>(doc % 4);
    const auto classes = random_rows(rng, classes_n, 6);
    const auto sentences = random_rows(rng, 1 + static_cast<std::size_t>(doc % 9), 6);
    std::vector<SentenceVote> votes;
    const auto got = ensemble_distribution("d" + std::to_string(doc), to_mat(sentences), to_vecs(classes),
                                           WeightMode::kDiscriminative, nullptr, &votes);
    const auto expect = oracle::distribution(sentences, classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes_n; ++k) {
      CHECK(std::abs(got.probs[k] - expect[k]) < 1e-9);
      CHECK(got.probs[k] >= 0.0);
      sum += got.probs[k];
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    double wsum = 0.0;
    for (const auto& v : votes) {
      CHECK(v.gap >= 0.0);
      wsum += v.weight;
    }
    CHECK(std::abs(wsum - 1.0) < 1e-6);
  }
}

TEST_CASE("distribution is scale invariant") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto classes = to_vecs(random_rows(rng, 3, 5));
    const Mat s = to_mat(random_rows(rng, 4, 5));
    const auto a = ensemble_distribution("d", s, classes, WeightMode::kDiscriminative);
    const auto b = ensemble_distribution("d", s * scale(rng), classes, WeightMode::kDiscriminative);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.probs[k] == doctest::Approx(b.probs[k]).epsilon(1e-9));
  }
}

TEST_CASE("raising one gap never lowers its class mass") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SentenceVote> votes;
    for (int j = 0; j < 5; ++j) votes.push_back(sv(static_cast<int>(u(rng) * 3), u(rng)));
    const auto before = document_distribution(votes, 3);
    const std::size_t pick = static_cast<std::size_t>(u(rng) * 5);
    votes[pick].gap += u(rng);
    const auto after = document_distribution(votes, 3);
    const auto k = static_cast<std::size_t>(votes[pick].top_class);
    CHECK(after.probs[k] >= before.probs[k] - 1e-12);
  }
}

TEST_CASE("weight mode names") {
  for (const char* name : {"equal", "centrality", "discriminative", "both"}) CHECK(to_string(parse_weight_mode(name)) == name);
  CHECK_THROWS_AS(parse_weight_mode("random"), ConfigError);
}
