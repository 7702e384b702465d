#include "megclass/ensemble.hpp"

#include "megclass/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>

namespace megclass {

namespace {

void normalize_or_uniform(std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total > 0.0) {
    for (double& x : w) x /= total;
  } else {
    std::fill(w.begin(), w.end(), w.empty() ? 0.0 : 1.0 / static_cast<double>(w.size()));
  }
}

}  // namespace

WeightMode parse_weight_mode(const std::string& name) {
  if (name == "equal") return WeightMode::kEqual;
  if (name == "centrality") return WeightMode::kCentrality;
  if (name == "discriminative") return WeightMode::kDiscriminative;
  if (name == "both") return WeightMode::kBoth;
  throw ConfigError("unknown weight mode '" + name + "' (expected equal|centrality|discriminative|both)");
}

std::string to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::kEqual:
      return "equal";
    case WeightMode::kCentrality:
      return "centrality";
    case WeightMode::kDiscriminative:
      return "discriminative";
    case WeightMode::kBoth:
      return "both";
  }
  return "unknown";
}

Vote vote(const Vec& sentence, const std::vector<Vec>& class_vecs) {
  if (class_vecs.size() < 2) throw ConfigError("voting needs at least 2 classes");
  std::vector<double> sims(class_vecs.size());
  for (std::size_t k = 0; k < class_vecs.size(); ++k) sims[k] = cosine(sentence, class_vecs[k]);
  Vote v;
  v.top_class = argmax_lowest(sims);
  std::vector<double> sorted = sims;
  std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
  v.gap = sorted[0] - sorted[1];
  return v;
}

std::vector<SentenceVote> vote_document(const std::string& doc_id, const Mat& sentences,
                                        const std::vector<Vec>& class_vecs) {
  std::vector<SentenceVote> votes;
  votes.reserve(static_cast<std::size_t>(sentences.rows()));
  std::vector<double> gaps;
  for (Eigen::Index j = 0; j < sentences.rows(); ++j) {
    Vote v;
    try {
      v = vote(sentences.row(j).transpose(), class_vecs);
    } catch (const NumericalError& e) {
      throw NumericalError(doc_id + "#" + std::to_string(j) + ": " + e.what());
    }
    votes.push_back({doc_id, static_cast<int>(j), v.top_class, v.gap, 0.0});
    gaps.push_back(v.gap);
  }
  normalize_or_uniform(gaps);
  for (std::size_t j = 0; j < votes.size(); ++j) votes[j].weight = gaps[j];
  return votes;
}

ClassDistribution distribution_from_weights(const std::vector<SentenceVote>& votes, std::vector<double> weights,
                                            int num_classes) {
  if (votes.empty()) throw DataError("a class distribution needs at least one sentence vote");
  if (weights.size() != votes.size()) throw DataError("one weight per sentence vote is required");
  normalize_or_uniform(weights);
  ClassDistribution dist;
  dist.doc_id = votes.front().doc_id;
  dist.probs.assign(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t j = 0; j < votes.size(); ++j) {
    const int k = votes[j].top_class;
    if (k < 0 || k >= num_classes) throw DataError("vote for an unknown class");
    dist.probs[static_cast<std::size_t>(k)] += weights[j];
  }
  return dist;
}

ClassDistribution document_distribution(const std::vector<SentenceVote>& votes, int num_classes) {
  std::vector<double> gaps;
  gaps.reserve(votes.size());
  for (const auto& v : votes) gaps.push_back(v.gap);
  return distribution_from_weights(votes, std::move(gaps), num_classes);
}

ClassDistribution document_distribution_weighted(const std::vector<SentenceVote>& votes,
                                                 const std::vector<double>& alphas, int num_classes) {
  if (alphas.size() != votes.size()) throw DataError("one attention weight per sentence is required");
  std::vector<double> w(votes.size());
  double total = 0.0;
  for (std::size_t j = 0; j < votes.size(); ++j) {
    w[j] = alphas[j] * votes[j].gap;
    total += w[j];
  }
  if (total <= 0.0) w = alphas;
  return distribution_from_weights(votes, std::move(w), num_classes);
}

std::vector<double> centrality_weights(const Mat& sentences) {
  const auto n = static_cast<std::size_t>(sentences.rows());
  std::vector<double> c(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    double sum = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) {
      sum += cosine_or_zero(sentences.row(static_cast<Eigen::Index>(j)).transpose(),
                            sentences.row(static_cast<Eigen::Index>(i)).transpose());
    }
    c[j] = std::max(0.0, sum / static_cast<double>(n - j - 1));
  }
  normalize_or_uniform(c);
  return c;
}

std::vector<double> ablation_weights(WeightMode mode, const Mat& sentences, const std::vector<SentenceVote>& votes) {
  const auto n = static_cast<std::size_t>(sentences.rows());
  std::vector<double> gaps;
  for (const auto& v : votes) gaps.push_back(v.gap);
  switch (mode) {
    case WeightMode::kEqual:
      return std::vector<double>(n, 1.0 / static_cast<double>(n));
    case WeightMode::kCentrality:
      return centrality_weights(sentences);
    case WeightMode::kDiscriminative:
      normalize_or_uniform(gaps);
      return gaps;
    case WeightMode::kBoth: {
      normalize_or_uniform(gaps);
      std::vector<double> w = centrality_weights(sentences);
      for (std::size_t j = 0; j < n; ++j) w[j] *= gaps[j];
      normalize_or_uniform(w);
      return w;
    }
  }
  return {};
}

ClassDistribution ensemble_distribution(const std::string& doc_id, const Mat& sentences,
                                        const std::vector<Vec>& class_vecs, WeightMode mode,
                                        const std::vector<double>* alphas, std::vector<SentenceVote>* votes_out) {
  std::vector<SentenceVote> votes = vote_document(doc_id, sentences, class_vecs);
  ClassDistribution dist;
  if (mode == WeightMode::kDiscriminative) {
    dist = alphas ? document_distribution_weighted(votes, *alphas, static_cast<int>(class_vecs.size()))
                  : document_distribution(votes, static_cast<int>(class_vecs.size()));
  } else {
    std::vector<double> w = ablation_weights(mode, sentences, votes);
    if (alphas) {
      double total = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) total += (w[j] *= (*alphas)[j]);
      if (total <= 0.0) w = *alphas;
    }
    dist = distribution_from_weights(votes, std::move(w), static_cast<int>(class_vecs.size()));
  }
  if (votes_out) *votes_out = std::move(votes);
  return dist;
}

nlohmann::json distribution_to_json(const ClassDistribution& dist, const std::vector<SentenceVote>& votes) {
  nlohmann::json js_votes = nlohmann::json::array();
  for (const auto& v : votes) {
    js_votes.push_back({{"sent", v.sent_index}, {"top_class", v.top_class}, {"gap", v.gap}, {"weight", v.weight}});
  }
  return {{"id", dist.doc_id}, {"probs", dist.probs}, {"votes", js_votes}};
}

}  // namespace megclass
