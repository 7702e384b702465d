#pragma once

#include "megclass/attention_net.hpp"
#include "megclass/class_repr.hpp"
#include "megclass/ensemble.hpp"
#include "megclass/linalg.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace megclass {

inline constexpr int kDefaultPcaDims = 64;
inline constexpr double kDefaultTopK = 0.075;

struct PcaModel {
  Vec mean;
  Mat components;  // p x h, orthonormal rows
  Vec explained_variance;

  int dims() const { return static_cast<int>(components.rows()); }
  Vec transform(const Vec& v) const;
  Mat transform_rows(const Mat& rows) const;
};

// Top-p principal directions of the centered rows (via SVD). Each component
// is sign-fixed so its largest-magnitude entry is positive.
PcaModel fit_pca(const Mat& rows, int p);

struct ScoredDoc {
  std::string doc_id;
  int pseudo_label = 0;
  double confidence = 0.0;  // cosine to the pseudo-label's class
};

// Argmax-cosine pseudo labels. With a PCA model both documents and class
// vectors are projected first (the model is fit on documents only).
std::vector<ScoredDoc> score_documents(const std::vector<std::string>& doc_ids, const std::vector<Vec>& doc_vectors,
                                       const std::vector<Vec>& class_vecs, const PcaModel* pca);

// class id -> doc ids, ceil(k * count_k) most confident per pseudo-label pool.
using Selection = std::map<int, std::vector<std::string>>;
Selection select_top_k(const std::vector<ScoredDoc>& scored, double k_fraction, int num_classes);

// Replaces each class set with {initial vector} + selected document vectors
// and sets the class vector to the set mean.
std::vector<ClassModel> update_class_vectors(const std::vector<ClassModel>& models, const Selection& selections,
                                             const std::map<std::string, Vec>& doc_vectors);

struct FeedbackConfig {
  int iterations = 4;
  double k = kDefaultTopK;
  int pca_dims = kDefaultPcaDims;
  bool use_pca = true;
  WeightMode weight_mode = WeightMode::kDiscriminative;
  AttentionConfig attention;
  std::uint64_t seed = 0;  // iteration t trains from seed + t
};

struct IterationResult {
  int iteration = 0;  // 1-based
  std::vector<ClassDistribution> targets;
  std::vector<Vec> class_vectors;  // reference vectors used in this iteration
  NetworkParams params;
  std::vector<double> epoch_losses;
  std::vector<ContextualizedDoc> docs;
  PcaModel pca;
  int pca_dims = 0;
  std::vector<ScoredDoc> scores;      // drives selection (PCA space unless disabled)
  std::vector<ScoredDoc> raw_scores;  // un-reduced space, for comparison
  Selection selection;
  std::vector<ClassModel> updated_models;
};

struct FeedbackResult {
  std::vector<ClassDistribution> initial_targets;
  std::vector<std::vector<SentenceVote>> initial_votes;
  std::vector<IterationResult> iterations;
  std::vector<ClassModel> final_models;

  const std::vector<ScoredDoc>& final_scores() const { return iterations.back().scores; }
};

using IterationObserver = std::function<void(const IterationResult&)>;

// Initial ensemble targets, then `iterations` rounds of: train a fresh
// network on the original sentence vectors, score, select and update class
// vectors. Rounds after the first recompute targets from the previous
// round's contextualized sentences and attention weights.
FeedbackResult run_iterations(const std::vector<std::string>& doc_ids, const std::vector<Mat>& sentences,
                              const std::vector<ClassModel>& models, const FeedbackConfig& config,
                              const IterationObserver& observer = {});

}  // namespace megclass
