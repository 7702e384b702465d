#pragma once

#include "megclass/linalg.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace megclass {

struct SentenceVote {
  std::string doc_id;
  int sent_index = 0;
  int top_class = 0;
  double gap = 0.0;     // top-1 minus top-2 cosine
  double weight = 0.0;  // normalized vote weight within the document
};

struct ClassDistribution {
  std::string doc_id;
  std::vector<double> probs;

  int argmax() const { return argmax_lowest(probs); }
};

struct Vote {
  int top_class = 0;
  double gap = 0.0;
};

// Sentence weighting used by the label ensemble.
enum class WeightMode { kEqual, kCentrality, kDiscriminative, kBoth };

WeightMode parse_weight_mode(const std::string& name);
std::string to_string(WeightMode mode);

// Nearest class by cosine and the gap between the two largest similarities.
// Ties go to the lowest class id. Throws NumericalError on zero-norm input.
Vote vote(const Vec& sentence, const std::vector<Vec>& class_vecs);

// Votes for every row of a |d| x h sentence matrix; weights are normalized gaps.
std::vector<SentenceVote> vote_document(const std::string& doc_id, const Mat& sentences,
                                        const std::vector<Vec>& class_vecs);

// P(d in C_k) = sum of normalized gaps of the sentences voting for k.
// All-zero gaps fall back to uniform sentence weights.
ClassDistribution document_distribution(const std::vector<SentenceVote>& votes, int num_classes);

// Same, with vote weights proportional to alpha_j * gap_j. When every product
// vanishes the weights fall back to alpha.
ClassDistribution document_distribution_weighted(const std::vector<SentenceVote>& votes,
                                                 const std::vector<double>& alphas, int num_classes);

// Any weights (normalized internally, uniform if they sum to zero).
ClassDistribution distribution_from_weights(const std::vector<SentenceVote>& votes,
                                            std::vector<double> weights, int num_classes);

// Mean cosine of each sentence to all later sentences, clipped at 0 and
// normalized; the last sentence scores 0 before normalization.
std::vector<double> centrality_weights(const Mat& sentences);

std::vector<double> ablation_weights(WeightMode mode, const Mat& sentences, const std::vector<SentenceVote>& votes);

// Ensemble for one document under a weight mode; optional alphas multiply
// the mode weights (used once attention weights exist).
ClassDistribution ensemble_distribution(const std::string& doc_id, const Mat& sentences,
                                        const std::vector<Vec>& class_vecs, WeightMode mode,
                                        const std::vector<double>* alphas = nullptr,
                                        std::vector<SentenceVote>* votes_out = nullptr);

nlohmann::json distribution_to_json(const ClassDistribution& dist, const std::vector<SentenceVote>& votes);

}  // namespace megclass
