#pragma once

#include "megclass/corpus.hpp"
#include "megclass/embeddings.hpp"
#include "megclass/feedback.hpp"
#include "megclass/linalg.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace megclass {

inline constexpr double kDefaultDelta = 0.5;

struct PseudoExample {
  std::string doc_id;
  std::string text;
  int pseudo_label = 0;
  double confidence = 0.0;

  bool operator==(const PseudoExample&) const = default;
};

// Top ceil(delta * count_k) documents of every pseudo-label pool, ordered by
// class, then confidence descending, then doc id ascending.
std::vector<PseudoExample> build_pseudo_dataset(const std::vector<ScoredDoc>& scores,
                                                const std::vector<Document>& docs, double delta, int num_classes);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<int> predict(const std::vector<Document>& docs) const = 0;
};

class ClassifierTrainer {
 public:
  virtual ~ClassifierTrainer() = default;
  virtual std::unique_ptr<Classifier> train(const std::vector<PseudoExample>& examples, int num_classes) const = 0;
};

// Frozen document features: mean of all word vectors of the document.
class MeanPooledFeatures {
 public:
  MeanPooledFeatures(const std::vector<Document>& docs, const std::vector<DocTokens>& tokens);
  const Vec& at(const std::string& doc_id) const;
  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  std::map<std::string, Vec> features_;
};

struct LogisticConfig {
  int epochs = 300;
  double lr = 0.5;
  double l2 = 1e-4;
};

// Multinomial logistic regression over standardized mean-pooled embeddings,
// full-batch gradient descent from a zero initialization.
class LogisticRegressionTrainer : public ClassifierTrainer {
 public:
  LogisticRegressionTrainer(std::shared_ptr<const MeanPooledFeatures> features, LogisticConfig config = {});
  std::unique_ptr<Classifier> train(const std::vector<PseudoExample>& examples, int num_classes) const override;

 private:
  std::shared_ptr<const MeanPooledFeatures> features_;
  LogisticConfig config_;
};

// Trains on the pseudo set only, then labels every corpus document.
std::map<std::string, int> train_and_label(const ClassifierTrainer& trainer,
                                           const std::vector<PseudoExample>& pseudo_set,
                                           const std::vector<Document>& docs, int num_classes);

void write_pseudo_dataset(const std::filesystem::path& path, const std::vector<PseudoExample>& examples);
void write_predictions(const std::filesystem::path& path, const std::vector<Document>& docs,
                       const std::map<std::string, int>& predictions, const std::vector<ClassSpec>& classes);

}  // namespace megclass
