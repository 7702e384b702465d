#include "megclass/class_repr.hpp"

#include "megclass/error.hpp"

#include <json.hpp>

#include <map>

namespace megclass {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",     "about", "above", "after", "again", "all",   "also",  "am",    "an",    "and",   "any",
      "are",   "as",    "at",    "be",    "been",  "being", "but",   "by",    "can",   "could", "did",
      "do",    "does",  "for",   "from",  "had",   "has",   "have",  "he",    "her",   "here",  "him",
      "his",   "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",   "just",  "me",
      "more",  "most",  "my",    "no",    "not",   "of",    "on",    "one",   "only",  "or",    "other",
      "our",   "out",   "over",  "she",   "so",    "some",  "such",  "than",  "that",  "the",   "their",
      "them",  "then",  "there", "these", "they",  "this",  "those", "to",    "too",   "under", "up",
      "very",  "was",   "we",    "were",  "what",  "when",  "where", "which", "while", "who",   "why",
      "will",  "with",  "would", "you",   "your",  "s",     "t",     "d",     "ll",    "re",    "ve",
      "m",     "don"};
  return words;
}

std::vector<double> harmonic_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  return w;
}

Vec harmonic_mean_vector(const std::vector<Vec>& ranked) {
  if (ranked.empty()) throw NumericalError("harmonic mean of an empty keyword list");
  const auto w = harmonic_weights(ranked.size());
  Vec acc = Vec::Zero(ranked.front().size());
  double total = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    acc += w[i] * ranked[i];
    total += w[i];
  }
  return acc / total;
}

std::vector<ClassModel> expand_keywords(const std::vector<ClassSpec>& classes, const StaticWordTable& table,
                                        int keyword_count) {
  if (keyword_count < 1) throw ConfigError("keyword count T must be at least 1");
  const auto n_classes = classes.size();
  const auto vocab = static_cast<Eigen::Index>(table.size());

  // Row-normalized vocabulary; zero rows stay zero and never win.
  Mat unit = table.vectors().cast<double>();
  for (Eigen::Index i = 0; i < vocab; ++i) {
    const double n = unit.row(i).norm();
    if (n > 0.0) unit.row(i) /= n;
  }
  std::vector<bool> eligible(static_cast<std::size_t>(vocab));
  for (Eigen::Index i = 0; i < vocab; ++i) {
    eligible[static_cast<std::size_t>(i)] = !stopwords().contains(table.words()[static_cast<std::size_t>(i)]);
  }

  std::map<int, int> owner;  // vocab index -> class that claimed it first
  std::vector<std::set<int>> own(n_classes);
  std::vector<std::vector<Vec>> ranked(n_classes);
  std::vector<ClassModel> models(n_classes);

  for (std::size_t k = 0; k < n_classes; ++k) {
    const ClassSpec& spec = classes[k];
    Vec seed = Vec::Zero(table.dim());
    for (const std::string& w : spec.words) {
      const int idx = table.index_of(w);
      if (idx < 0) {
        throw DataError("class '" + spec.surface_name + "': word '" + w + "' does not occur in the corpus");
      }
      seed += table.vectors().row(idx).transpose().cast<double>();
      owner.try_emplace(idx, static_cast<int>(k));
      own[k].insert(idx);
    }
    seed /= static_cast<double>(spec.words.size());
    if (seed.norm() == 0.0) throw NumericalError("class '" + spec.surface_name + "' has a zero seed vector");
    std::string phrase;
    for (const auto& w : spec.words) phrase += (phrase.empty() ? "" : " ") + w;
    models[k].class_id = spec.class_id;
    models[k].name = spec.surface_name;
    models[k].keywords.push_back({phrase, 1});
    ranked[k].push_back(seed);
  }

  std::vector<bool> active(n_classes, keyword_count > 1);
  auto any_active = [&] { return std::find(active.begin(), active.end(), true) != active.end(); };
  while (any_active()) {
    for (std::size_t k = 0; k < n_classes; ++k) {
      if (!active[k]) continue;
      if (static_cast<int>(ranked[k].size()) >= keyword_count) {
        active[k] = false;
        continue;
      }
      const Vec cv = harmonic_mean_vector(ranked[k]);
      const Vec sims = unit * (cv / cv.norm());
      int best = -1;
      for (Eigen::Index i = 0; i < vocab; ++i) {
        if (!eligible[static_cast<std::size_t>(i)] || own[k].contains(static_cast<int>(i))) continue;
        if (unit.row(i).squaredNorm() == 0.0) continue;
        if (best < 0 || sims(i) > sims(best)) best = static_cast<int>(i);
      }
      if (best < 0) {
        active[k] = false;
        continue;
      }
      auto it = owner.find(best);
      if (it != owner.end() && it->second != static_cast<int>(k)) {
        active[k] = false;
        continue;
      }
      owner.emplace(best, static_cast<int>(k));
      own[k].insert(best);
      models[k].keywords.push_back(
          {table.words()[static_cast<std::size_t>(best)], static_cast<int>(ranked[k].size()) + 1});
      ranked[k].push_back(table.vectors().row(best).transpose().cast<double>());
    }
  }

  for (std::size_t k = 0; k < n_classes; ++k) {
    models[k].initial_vector = harmonic_mean_vector(ranked[k]);
    if (!models[k].initial_vector.allFinite() || models[k].initial_vector.norm() == 0.0) {
      throw NumericalError("class '" + models[k].name + "' has a degenerate class vector");
    }
    models[k].class_vector = models[k].initial_vector;
  }
  return models;
}

std::vector<Vec> class_vectors(const std::vector<ClassModel>& models) {
  std::vector<Vec> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(m.class_vector);
  return out;
}

SentenceRepr sentence_representation(const TokenMatrix& tokens, const std::vector<Vec>& class_vecs) {
  const Eigen::Index n = tokens.vectors.rows();
  if (n == 0) throw DataError(tokens.doc_id + "#" + std::to_string(tokens.sent_index) + ": empty sentence");
  Vec avg = Vec::Zero(tokens.vectors.cols());
  for (const Vec& c : class_vecs) avg += c;
  avg /= static_cast<double>(class_vecs.size());

  std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const Vec v = tokens.vectors.row(t).transpose().cast<double>();
    double best = -2.0;
    for (const Vec& c : class_vecs) best = std::max(best, cosine_or_zero(v, c));
    const double r = std::max(0.0, best - cosine_or_zero(v, avg));
    raw[static_cast<std::size_t>(t)] = r;
    total += r;
  }
  SentenceRepr out;
  out.doc_id = tokens.doc_id;
  out.sent_index = tokens.sent_index;
  out.word_weights.resize(static_cast<std::size_t>(n));
  out.vector = Vec::Zero(tokens.vectors.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    const double w = total > 0.0 ? raw[static_cast<std::size_t>(t)] / total : 1.0 / static_cast<double>(n);
    out.word_weights[static_cast<std::size_t>(t)] = w;
    out.vector += w * tokens.vectors.row(t).transpose().cast<double>();
  }
  return out;
}

SentenceRepr sentence_representation(const TokenMatrix& tokens, const std::vector<ClassModel>& models) {
  return sentence_representation(tokens, class_vectors(models));
}

std::vector<Mat> sentence_matrices(const std::vector<DocTokens>& tokens, const std::vector<Vec>& class_vecs,
                                   int threads) {
  std::vector<Mat> out(tokens.size());
  parallel_for(tokens.size(), threads, [&](std::size_t i) {
    const DocTokens& doc = tokens[i];
    const Eigen::Index h = doc.empty() ? 0 : doc.front().vectors.cols();
    out[i].resize(static_cast<Eigen::Index>(doc.size()), h);
    for (std::size_t j = 0; j < doc.size(); ++j) {
      out[i].row(static_cast<Eigen::Index>(j)) = sentence_representation(doc[j], class_vecs).vector.transpose();
    }
  });
  return out;
}

nlohmann::json keywords_to_json(const std::vector<ClassModel>& models) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json kws = nlohmann::json::array();
    for (const auto& kw : m.keywords) kws.push_back({{"word", kw.word}, {"rank", kw.rank}});
    out.push_back({{"class_id", m.class_id}, {"name", m.name}, {"keywords", kws}});
  }
  return out;
}

}  // namespace megclass
