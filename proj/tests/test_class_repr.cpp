#include "megclass/class_repr.hpp"
#include "megclass/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace megclass;

namespace {

StaticWordTable table_from(const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end());
  const int dim = static_cast<int>(sorted.front().second.size());
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  MatF vectors(static_cast<Eigen::Index>(sorted.size()), dim);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    words.push_back(sorted[i].first);
    counts.push_back(1);
    for (int c = 0; c < dim; ++c) vectors(static_cast<Eigen::Index>(i), c) = static_cast<float>(sorted[i].second[static_cast<std::size_t>(c)]);
  }
  return StaticWordTable(dim, words, counts, vectors);
}

double cos_plain(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return ab / std::sqrt(aa * bb);
}

// Straight simulation of round-robin expansion over plain vectors.
std::vector<std::vector<std::string>> greedy_oracle(const std::vector<std::string>& names,
                                                    const std::vector<std::pair<std::string, std::vector<double>>>& vocab,
                                                    int T) {
  std::map<std::string, std::vector<double>> vec;
  for (const auto& [w, v] : vocab) {
    std::vector<double> f(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
    vec[w] = f;
  }
  std::map<std::string, int> owner;
  std::vector<std::vector<std::string>> lists;
  for (std::size_t k = 0; k < names.size(); ++k) {
    lists.push_back({names[k]});
    owner[names[k]] = static_cast<int>(k);
  }
  std::vector<bool> active(names.size(), T > 1);
  bool any = T > 1;
  while (any) {
    any = false;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!active[k]) continue;
      if (static_cast<int>(lists[k].size()) >= T) {
        active[k] = false;
        continue;
      }
      const std::size_t dim = vec.begin()->second.size();
      std::vector<double> c(dim, 0.0);
      double total = 0;
      for (std::size_t r = 0; r < lists[k].size(); ++r) {
        for (std::size_t i = 0; i < dim; ++i) c[i] += vec[lists[k][r]][i] / static_cast<double>(r + 1);
        total += 1.0 / static_cast<double>(r + 1);
      }
      for (double& x : c) x /= total;
      std::string best;
      double best_sim = -2;
      for (const auto& [w, v] : vec) {
        if (std::find(lists[k].begin(), lists[k].end(), w) != lists[k].end()) continue;
        if (stopwords().contains(w)) continue;
        const double s = cos_plain(v, c);
        if (s > best_sim + 1e-12) best_sim = s, best = w;
      }
      if (best.empty() || (owner.contains(best) && owner[best] != static_cast<int>(k))) {
        active[k] = false;
        continue;
      }
      owner[best] = static_cast<int>(k);
      lists[k].push_back(best);
      any = true;
    }
    any = any || std::find(active.begin(), active.end(), true) != active.end();
    if (std::find(active.begin(), active.end(), true) == active.end()) break;
  }
  return lists;
}

std::vector<std::string> keyword_words(const ClassModel& m) {
  std::vector<std::string> out;
  for (const auto& k : m.keywords) out.push_back(k.word);
  return out;
}

TokenMatrix tokens_of(const std::vector<std::vector<double>>& rows) {
  TokenMatrix tm;
  tm.doc_id = "d";
  tm.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      tm.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<float>(rows[r][c]);
    }
  }
  return tm;
}

}  // namespace

TEST_CASE("rank weights are harmonic") {
  const auto w = harmonic_weights(4);
  CHECK(w == std::vector<double>{1.0, 0.5, 1.0 / 3.0, 0.25});
  const Vec a = Vec::Unit(2, 0);
  const Vec b = Vec::Unit(2, 1);
  const Vec m = harmonic_mean_vector({a, b});
  CHECK(m(0) == doctest::Approx(2.0 / 3.0));
  CHECK(m(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("T = 1 keeps the seed as the class vector") {
  const auto table = table_from({{"sports", {1, 0, 0}}, {"game", {0.9, 0.1, 0}}, {"vote", {0, 1, 0}}});
  const auto models = expand_keywords(make_classes({"sports", "vote"}), table, 1);
  REQUIRE(models.size() == 2);
  CHECK(keyword_words(models[0]) == std::vector<std::string>{"sports"});
  CHECK(models[0].class_vector.isApprox(Vec::Unit(3, 0)));
  CHECK(models[0].class_set.empty());
}

TEST_CASE("five-word vocabulary expansion matches a greedy simulation") {
  const std::vector<std::pair<std::string, std::vector<double>>> vocab = {
      {"alpha", {1.0, 0.0, 0.0}},  {"apple", {0.8, 0.3, 0.1}}, {"beta", {0.0, 1.0, 0.0}},
      {"berry", {0.2, 0.9, 0.3}},  {"amber", {0.7, 0.0, 0.6}}};
  const auto table = table_from(vocab);
  const auto models = expand_keywords(make_classes({"alpha", "beta"}), table, 3);
  const auto oracle = greedy_oracle({"alpha", "beta"}, vocab, 3);
  CHECK(keyword_words(models[0]) == oracle[0]);
  CHECK(keyword_words(models[1]) == oracle[1]);
  CHECK(keyword_words(models[0]) == std::vector<std::string>{"alpha", "apple", "amber"});
  CHECK(keyword_words(models[1]) == std::vector<std::string>{"beta", "berry"});
  for (std::size_t i = 0; i < models[0].keywords.size(); ++i) CHECK(models[0].keywords[i].rank == static_cast<int>(i) + 1);
}

TEST_CASE("a contested word goes to the class reaching it first") {
  // "shared" is the nearest candidate for both classes; class 0 moves first.
  const std::vector<std::pair<std::string, std::vector<double>>> vocab = {
      {"left", {1.0, 0.0, 0.0}},   {"right", {0.0, 1.0, 0.0}}, {"shared", {0.7, 0.7, 0.0}},
      {"lefty", {0.3, 0.0, 0.9}},  {"righty", {0.0, 0.3, 0.9}}};
  const auto table = table_from(vocab);
  const auto models = expand_keywords(make_classes({"left", "right"}), table, 4);
  const auto oracle = greedy_oracle({"left", "right"}, vocab, 4);
  CHECK(keyword_words(models[0]) == oracle[0]);
  CHECK(keyword_words(models[1]) == oracle[1]);
  CHECK(keyword_words(models[0])[1] == "shared");
  // The other class stops as soon as its nearest word is taken.
  CHECK(keyword_words(models[1]) == std::vector<std::string>{"right"});
}

TEST_CASE("random vocabularies agree with the greedy simulation and stay disjoint") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::pair<std::string, std::vector<double>>> vocab;
    for (int w = 0; w < 30; ++w) {
      std::vector<double> v(5);
      for (double& x : v) x = nd(rng);
      vocab.push_back({"w" + std::to_string(100 + w), v});
    }
    const std::vector<std::string> names = {"w100", "w101", "w102"};
    const int T = 1 + trial % 8;
    const auto table = table_from(vocab);
    const auto models = expand_keywords(make_classes(names), table, T);
    const auto oracle = greedy_oracle(names, vocab, T);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (std::size_t k = 0; k < names.size(); ++k) {
      REQUIRE(keyword_words(models[k]) == oracle[k]);
      CHECK(static_cast<int>(models[k].keywords.size()) <= T);
      for (const auto& kw : models[k].keywords) seen.insert(kw.word);
      total += models[k].keywords.size();
      CHECK(models[k].class_vector.allFinite());
      CHECK(models[k].class_vector.norm() > 0.0);
    }
    CHECK(seen.size() == total);
  }
}

TEST_CASE("multi-word names average their words and skip stopwords as candidates") {
  const auto table = table_from({{"care", {1, 0, 0}},
                                 {"act", {0, 1, 0}},
                                 {"the", {0.5, 0.5, 0.0}},
                                 {"health", {0.6, 0.6, 0.1}},
                                 {"war", {0, 0, 1}}});
  const auto models = expand_keywords(make_classes({"care act", "war"}), table, 2);
  CHECK(models[0].keywords[0].word == "care act");
  CHECK(models[0].keywords[1].word == "health");
  CHECK(models[0].initial_vector.isApprox((Vec(3) << (0.5 + 0.6 / 2) / 1.5, (0.5 + 0.6 / 2) / 1.5, 0.1 / 2 / 1.5).finished(), 1e-6));
}

TEST_CASE("a class word missing from the vocabulary names the class") {
  const auto table = table_from({{"a1", {1, 0}}, {"b1", {0, 1}}});
  CHECK_THROWS_WITH_AS(expand_keywords(make_classes({"a1", "zebra"}), table, 3), doctest::Contains("zebra"),
                       DataError);
}

TEST_CASE("sentence representation weights") {
  const std::vector<Vec> classes = {(Vec(3) << 1, 0, 0).finished(),
                                    (Vec(3) << -0.5, std::sqrt(3.0) / 2.0, 0).finished()};
  SUBCASE("one word") {
    const auto r = sentence_representation(tokens_of({{0.3, 0.2, 0.1}}), classes);
    CHECK(r.word_weights == std::vector<double>{1.0});
    CHECK(r.vector.isApprox((Vec(3) << 0.3, 0.2, 0.1).finished(), 1e-7));
  }
  SUBCASE("class-indicative word takes all the weight") {
    // cos(word, class A) = 1 and cos(word, mean of classes) = 0.5; the other
    // two words are orthogonal to every class.
    const auto r = sentence_representation(tokens_of({{2, 0, 0}, {0, 0, 1}, {0, 0, -3}}), classes);
    CHECK(r.word_weights[0] == doctest::Approx(1.0));
    CHECK(r.word_weights[1] == doctest::Approx(0.0));
    CHECK(r.word_weights[2] == doctest::Approx(0.0));
    CHECK(r.vector.isApprox((Vec(3) << 2, 0, 0).finished()));
  }
  SUBCASE("no indicative word falls back to the mean") {
    const auto r = sentence_representation(tokens_of({{0, 0, 1}, {0, 0, 3}}), classes);
    CHECK(r.word_weights[0] == doctest::Approx(0.5));
    CHECK(r.vector(2) == doctest::Approx(2.0));
  }
}

// Property: weights are a convex combination and the vector is their
// weighted mean.
TEST_CASE("sentence vectors are convex combinations of their words") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec> classes;
    for (int k = 0; k < 3; ++k) classes.push_back(Vec::NullaryExpr(6, [&] { return nd(rng); }));
    std::vector<std::vector<double>> rows(1 + trial % 7, std::vector<double>(6));
    for (auto& r : rows) for (double& x : r) x = nd(rng);
    const TokenMatrix tm = tokens_of(rows);
    const auto rep = sentence_representation(tm, classes);
    double sum = 0.0;
    Vec expect = Vec::Zero(6);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      CHECK(rep.word_weights[t] >= 0.0);
      sum += rep.word_weights[t];
      expect += rep.word_weights[t] * tm.vectors.row(static_cast<Eigen::Index>(t)).transpose().cast<double>();
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((rep.vector - expect).norm() < 1e-9);
  }
}

TEST_CASE("keyword export") {
  const auto table = table_from({{"x", {1, 0}}, {"y", {0, 1}}});
  const auto js = keywords_to_json(expand_keywords(make_classes({"x", "y"}), table, 1));
  CHECK(js.size() == 2);
  CHECK(js[0]["name"] == "x");
  CHECK(js[0]["keywords"][0]["rank"] == 1);
}
