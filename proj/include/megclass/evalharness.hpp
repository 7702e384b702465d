#pragma once

#include "megclass/corpus.hpp"
#include "megclass/embeddings.hpp"
#include "megclass/feedback.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace megclass {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;    // gold count
  int predicted = 0;  // predicted count
};

struct EvalReport {
  std::string stage;  // MEG-Init, MEG-CX, iteration-t, top-k-subset, final-classifier
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t num_docs = 0;
  std::vector<ClassScores> per_class;
};

using Predictions = std::map<std::string, int>;

// Single-label micro/macro F1. Classes with neither gold nor predicted
// documents are left out of the macro average unless zero_inclusion is set.
EvalReport f1_scores(const GoldLabels& gold, const Predictions& predicted, int num_classes,
                     bool zero_inclusion = false, std::string stage = {});

Predictions to_predictions(const std::vector<ScoredDoc>& scored);
Predictions argmax_predictions(const std::vector<ClassDistribution>& dists);

// Restricts predictions to the documents that have gold labels.
Predictions restrict_to(const Predictions& predicted, const GoldLabels& gold);

enum class AblationStage { kMegInit, kMegCx };

EvalReport ablation(AblationStage stage, const FeedbackResult& state, const GoldLabels& gold, int num_classes,
                    bool zero_inclusion = false);

// Scores only the ceil(k * count_k) most confident documents per class.
EvalReport topk_accuracy(const std::vector<ScoredDoc>& scored, const GoldLabels& gold, double k, int num_classes,
                         bool zero_inclusion = false);

nlohmann::json report_to_json(const EvalReport& report);

struct SyntheticConfig {
  int classes = 4;
  int docs_per_class = 200;
  int sents_per_doc = 8;
  double purity = 0.7;     // chance a sentence is about the document's own class
  double noise_std = 0.2;  // per-dimension std of sentence shifts and token noise
  std::uint64_t seed = 7;
  int dim = 32;
  int words_per_sentence = 8;
  double topic_word_ratio = 0.5;
  int vocab_per_class = 20;
  int filler_vocab = 60;
  double word_spread = 0.6;
  // Displacement of each class name's vector away from its class direction.
  double name_offset = 0.0;
  // Put each document's own-class sentences first.
  bool leading_bias = false;
};

// Documents built from class "directions": own-class sentences with
// probability `purity`, the rest about other classes, plus noise.
struct SyntheticCorpus {
  std::vector<RawRecord> records;
  std::vector<Document> docs;
  std::vector<ClassSpec> classes;
  GoldLabels gold;
  PrecomputedProvider provider;
  std::vector<std::vector<int>> sentence_topics;  // per doc, per sentence
};

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config);

// corpus.jsonl, classes.txt, labels.jsonl and embeddings/ under dir.
void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace megclass
