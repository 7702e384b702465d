#include "megclass/class_repr.hpp"
#include "megclass/ensemble.hpp"
#include "megclass/error.hpp"
#include "megclass/evalharness.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace megclass;

namespace {

GoldLabels gold_of(const std::vector<int>& labels) {
  GoldLabels g;
  for (std::size_t i = 0; i < labels.size(); ++i) g["d" + std::to_string(i)] = labels[i];
  return g;
}

Predictions pred_of(const std::vector<int>& labels) { return gold_of(labels); }

// argmax of the initial ensemble distribution for every synthetic document.
Predictions initial_predictions(const SyntheticCorpus& c) {
  const auto tokens = embed_corpus(c.docs, c.provider);
  const auto table = build_static_table(c.docs, tokens);
  const auto models = expand_keywords(c.classes, table, 20);
  const auto mats = sentence_matrices(tokens, class_vectors(models));
  Predictions p;
  for (std::size_t i = 0; i < c.docs.size(); ++i) {
    p[c.docs[i].doc_id] =
        ensemble_distribution(c.docs[i].doc_id, mats[i], class_vectors(models), WeightMode::kDiscriminative).argmax();
  }
  return p;
}

}  // namespace

TEST_CASE("F1 scores") {
  SUBCASE("perfect") {
    const auto r = f1_scores(gold_of({0, 1, 2, 1}), pred_of({0, 1, 2, 1}), 3);
    CHECK(r.micro_f1 == 1.0);
    CHECK(r.macro_f1 == 1.0);
  }
  SUBCASE("hand-computed confusion matrix") {
    const auto r = f1_scores(gold_of({0, 0, 0, 1}), pred_of({0, 0, 1, 1}), 2);
    CHECK(r.micro_f1 == doctest::Approx(0.75));
    // A: P 1, R 2/3, F1 0.8. B: P 1/2, R 1, F1 2/3.
    CHECK(r.per_class[0].f1 == doctest::Approx(0.8));
    CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.macro_f1 == doctest::Approx(11.0 / 15.0));
  }
  SUBCASE("everything predicted as one class") {
    const auto r = f1_scores(gold_of({0, 0, 1, 1}), pred_of({0, 0, 0, 0}), 2);
    CHECK(r.micro_f1 == doctest::Approx(0.5));
    CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("unused classes are left out unless zero inclusion is on") {
    const auto ex = f1_scores(gold_of({0, 1}), pred_of({0, 1}), 4);
    CHECK(ex.macro_f1 == doctest::Approx(1.0));
    const auto in = f1_scores(gold_of({0, 1}), pred_of({0, 1}), 4, true);
    CHECK(in.macro_f1 == doctest::Approx(0.5));
  }
  SUBCASE("micro equals accuracy") {
    const auto r = f1_scores(gold_of({0, 2, 1, 1, 2, 0, 0}), pred_of({2, 2, 1, 0, 2, 0, 1}), 3);
    CHECK(r.micro_f1 == r.accuracy);
    CHECK(r.accuracy == doctest::Approx(4.0 / 7.0));
  }
  SUBCASE("mismatched keys") {
    CHECK_THROWS_AS(f1_scores(gold_of({0, 1}), pred_of({0}), 2), DataError);
    Predictions p = pred_of({0, 1});
    p.erase("d1");
    p["zz"] = 1;
    CHECK_THROWS_AS(f1_scores(gold_of({0, 1}), p, 2), DataError);
  }
}

TEST_CASE("top-k evaluation") {
  const std::vector<ScoredDoc> scored = {{"d0", 0, 0.9}, {"d1", 0, 0.2}, {"d2", 1, 0.8}, {"d3", 1, 0.1}};
  const GoldLabels gold = gold_of({0, 1, 1, 0});
  SUBCASE("k = 1 is the full report") {
    const auto a = topk_accuracy(scored, gold, 1.0, 2);
    const auto b = f1_scores(gold, to_predictions(scored), 2);
    CHECK(a.micro_f1 == b.micro_f1);
    CHECK(a.macro_f1 == b.macro_f1);
  }
  SUBCASE("confident documents are the correct ones") {
    const auto r = topk_accuracy(scored, gold, 0.5, 2);
    CHECK(r.num_docs == 2);
    CHECK(r.micro_f1 == 1.0);
  }
  SUBCASE("no labeled documents") { CHECK_THROWS_AS(topk_accuracy(scored, GoldLabels{}, 0.5, 2), DataError); }
}

TEST_CASE("ablation stages need their inputs") {
  FeedbackResult empty;
  CHECK_THROWS_AS(ablation(AblationStage::kMegInit, empty, gold_of({0}), 2), PrerequisiteError);
  CHECK_THROWS_AS(ablation(AblationStage::kMegCx, empty, gold_of({0}), 2), PrerequisiteError);
}

TEST_CASE("synthetic corpus") {
  SyntheticConfig cfg;
  cfg.classes = 3;
  cfg.docs_per_class = 20;
  SUBCASE("shape and labels") {
    const auto c = make_synthetic_corpus(cfg);
    CHECK(c.docs.size() == 60);
    CHECK(c.classes.size() == 3);
    CHECK(c.gold.size() == 60);
    for (const auto& d : c.docs) CHECK(d.sentences.size() == static_cast<std::size_t>(cfg.sents_per_doc));
    const auto tokens = embed_corpus(c.docs, c.provider);
    CHECK(tokens.size() == 60);
  }
  SUBCASE("regeneration is identical") {
    testutil::TempDir a("synth_a"), b("synth_b");
    write_synthetic_corpus(a.path(), make_synthetic_corpus(cfg));
    write_synthetic_corpus(b.path(), make_synthetic_corpus(cfg));
    for (const char* f : {"corpus.jsonl", "classes.txt", "labels.jsonl"}) CHECK(testutil::read_text(a / f) == testutil::read_text(b / f));
    for (const auto& entry : std::filesystem::directory_iterator(a / "embeddings")) {
      std::ifstream x(entry.path(), std::ios::binary), y(b / "embeddings" / entry.path().filename(), std::ios::binary);
      CHECK(std::string(std::istreambuf_iterator<char>(x), {}) == std::string(std::istreambuf_iterator<char>(y), {}));
    }
  }
  SUBCASE("documents mix in other topics") {
    cfg.purity = 0.6;
    const auto c = make_synthetic_corpus(cfg);
    int mixed = 0;
    for (std::size_t i = 0; i < c.docs.size(); ++i) {
      const int label = c.gold.at(c.docs[i].doc_id);
      for (int topic : c.sentence_topics[i]) {
        if (topic != label) {
          ++mixed;
          break;
        }
      }
    }
    CHECK(mixed > 0);
  }
  SUBCASE("pure noiseless corpus is solved by the initial ensemble") {
    cfg.purity = 1.0;
    cfg.noise_std = 0.0;
    const auto c = make_synthetic_corpus(cfg);
    const auto r = f1_scores(c.gold, initial_predictions(c), 3);
    CHECK(r.micro_f1 == 1.0);
  }
  SUBCASE("invalid settings") {
    cfg.purity = 0.5;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg), ConfigError);
    cfg.purity = 0.7;
    cfg.classes = 1;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg), ConfigError);
  }
}

TEST_CASE("report json") {
  const auto r = f1_scores(gold_of({0, 1}), pred_of({0, 0}), 2, false, "MEG-Init");
  const auto js = report_to_json(r);
  CHECK(js["stage"] == "MEG-Init");
  CHECK(js["micro_f1"] == 0.5);
  CHECK(js["per_class"].size() == 2);
}
