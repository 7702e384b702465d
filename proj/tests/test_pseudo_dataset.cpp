#include "megclass/error.hpp"
#include "megclass/pseudo_dataset.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace megclass;

namespace {

std::vector<Document> docs_for(const std::vector<ScoredDoc>& scores) {
  std::vector<Document> docs;
  for (const auto& s : scores) {
    Document d;
    d.doc_id = s.doc_id;
    d.raw_text = "text of " + s.doc_id;
    docs.push_back(d);
  }
  return docs;
}

// Sort-and-slice reference.
std::vector<PseudoExample> sort_oracle(const std::vector<ScoredDoc>& scores, double delta, int classes) {
  std::vector<PseudoExample> out;
  for (int k = 0; k < classes; ++k) {
    std::vector<ScoredDoc> pool;
    for (const auto& s : scores)
      if (s.pseudo_label == k) pool.push_back(s);
    std::sort(pool.begin(), pool.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
      return a.confidence != b.confidence ? a.confidence > b.confidence : a.doc_id < b.doc_id;
    });
    const auto keep = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(pool.size())));
    for (std::size_t i = 0; i < keep; ++i) out.push_back({pool[i].doc_id, "text of " + pool[i].doc_id, k, pool[i].confidence});
  }
  return out;
}

}  // namespace

TEST_CASE("pseudo dataset selection") {
  SUBCASE("delta 1 keeps everything") {
    const std::vector<ScoredDoc> s = {{"a", 0, 0.3}, {"b", 1, 0.9}, {"c", 0, 0.5}};
    const auto p = build_pseudo_dataset(s, docs_for(s), 1.0, 2);
    CHECK(p.size() == 3);
    CHECK(p[0].doc_id == "c");
    CHECK(p[1].doc_id == "a");
    CHECK(p[2].doc_id == "b");
  }
  SUBCASE("four documents with delta 0.5") {
    const std::vector<ScoredDoc> s = {{"a", 0, 0.3}, {"b", 0, 0.9}, {"c", 0, 0.5}, {"d", 0, 0.1}, {"e", 1, 0.2}};
    const auto p = build_pseudo_dataset(s, docs_for(s), 0.5, 2);
    REQUIRE(p.size() == 3);
    CHECK(p[0].doc_id == "b");
    CHECK(p[1].doc_id == "c");
    CHECK(p[2].doc_id == "e");
  }
  SUBCASE("equal confidences order by id") {
    const std::vector<ScoredDoc> s = {{"z", 0, 0.5}, {"m", 0, 0.5}, {"a", 0, 0.5}};
    const auto p = build_pseudo_dataset(s, docs_for(s), 1.0, 2);
    CHECK(p[0].doc_id == "a");
    CHECK(p[2].doc_id == "z");
  }
  SUBCASE("bad delta") {
    CHECK_THROWS_AS(build_pseudo_dataset({}, {}, 0.0, 2), ConfigError);
    CHECK_THROWS_AS(build_pseudo_dataset({}, {}, 1.1, 2), ConfigError);
  }
}

TEST_CASE("pseudo dataset matches the sort oracle") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredDoc> s;
    const int n = 1 + trial * 3;
    for (int i = 0; i < n; ++i) {
      // Coarse confidences so ties actually occur.
      s.push_back({"d" + std::to_string(1000 + i), static_cast<int>(u(rng) * 4), std::round(u(rng) * 10) / 10});
    }
    const double delta = 0.1 + 0.9 * u(rng);
    const auto got = build_pseudo_dataset(s, docs_for(s), delta, 4);
    CHECK(got == sort_oracle(s, delta, 4));
    std::set<std::string> ids;
    for (const auto& e : got) CHECK(ids.insert(e.doc_id).second);
  }
}

namespace {

struct Toy {
  std::vector<Document> docs;
  std::vector<DocTokens> tokens;
  std::vector<PseudoExample> examples;
  std::map<std::string, int> gold;
};

// Documents whose word vectors sit near one of three well separated
// centers; only every other document goes into the pseudo set.
Toy separable(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.2);
  const std::vector<std::vector<double>> centers = {{3, 0, 0, 0}, {0, 3, 0, 0}, {0, 0, 3, 0}};
  Toy t;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 3;
    Document d;
    d.doc_id = "d" + std::to_string(i);
    d.raw_text = "x y z";
    Sentence s;
    s.words = {"x", "y", "z"};
    d.sentences = {s};
    TokenMatrix tm;
    tm.doc_id = d.doc_id;
    tm.vectors.resize(3, 4);
    for (int w = 0; w < 3; ++w)
      for (int c = 0; c < 4; ++c) tm.vectors(w, c) = static_cast<float>(centers[static_cast<std::size_t>(label)][static_cast<std::size_t>(c)] + nd(rng));
    t.docs.push_back(d);
    t.tokens.push_back({tm});
    t.gold[d.doc_id] = label;
    if (i % 2 == 0) t.examples.push_back({d.doc_id, d.raw_text, label, 1.0});
  }
  return t;
}

}  // namespace

TEST_CASE("reference classifier") {
  const Toy t = separable(52);
  auto features = std::make_shared<MeanPooledFeatures>(t.docs, t.tokens);
  CHECK(features->dim() == 4);
  const LogisticRegressionTrainer trainer(features);
  const auto pred = train_and_label(trainer, t.examples, t.docs, 3);
  REQUIRE(pred.size() == t.docs.size());
  for (const auto& e : t.examples) CHECK(pred.at(e.doc_id) == e.pseudo_label);
  int unseen_hits = 0, unseen = 0;
  for (const auto& [id, g] : t.gold) {
    if (std::any_of(t.examples.begin(), t.examples.end(), [&](const PseudoExample& e) { return e.doc_id == id; })) continue;
    ++unseen;
    unseen_hits += pred.at(id) == g;
  }
  CHECK(unseen_hits == unseen);
  CHECK(train_and_label(trainer, t.examples, t.docs, 3) == pred);
  CHECK_THROWS(train_and_label(trainer, {}, t.docs, 3));
  CHECK_THROWS(features->at("missing"));
}

TEST_CASE("export files") {
  testutil::TempDir dir("pseudo");
  const std::vector<ScoredDoc> s = {{"a", 0, 0.75}, {"b", 1, 0.5}};
  const auto docs = docs_for(s);
  write_pseudo_dataset(dir / "p.jsonl", build_pseudo_dataset(s, docs, 1.0, 2));
  std::istringstream lines(testutil::read_text(dir / "p.jsonl"));
  std::string line;
  std::getline(lines, line);
  const auto first = nlohmann::json::parse(line);
  CHECK(first["id"] == "a");
  CHECK(first["text"] == "text of a");
  CHECK(first["pseudo_label"] == 0);
  CHECK(first["confidence"] == 0.75);

  const auto classes = make_classes({"sports", "politics"});
  write_predictions(dir / "pred.jsonl", docs, {{"a", 0}, {"b", 1}}, classes);
  std::istringstream plines(testutil::read_text(dir / "pred.jsonl"));
  std::getline(plines, line);
  std::getline(plines, line);
  const auto second = nlohmann::json::parse(line);
  CHECK(second["id"] == "b");
  CHECK(second["label"] == 1);
}
