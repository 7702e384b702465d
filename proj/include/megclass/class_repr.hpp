#pragma once

#include "megclass/corpus.hpp"
#include "megclass/embeddings.hpp"
#include "megclass/linalg.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace megclass {

inline constexpr int kDefaultKeywordCount = 100;

struct Keyword {
  std::string word;  // multi-word class names keep their phrase at rank 1
  int rank = 1;
};

struct ClassModel {
  int class_id = 0;
  std::string name;
  std::vector<Keyword> keywords;
  Vec initial_vector;           // keyword-based vector, never changes
  Vec class_vector;             // current c_k
  std::vector<Vec> class_set;   // members whose mean is class_vector; empty until feedback runs
};

struct SentenceRepr {
  std::string doc_id;
  int sent_index = 0;
  Vec vector;
  std::vector<double> word_weights;
};

// Words never offered as expansion candidates.
const std::set<std::string>& stopwords();

// 1, 1/2, 1/3, ... for ranks 1..n.
std::vector<double> harmonic_weights(std::size_t n);

// Rank-weighted average of ranked vectors (first = rank 1).
Vec harmonic_mean_vector(const std::vector<Vec>& ranked);

// Greedy round-robin keyword expansion. Each class starts from its name; on
// its turn a class recomputes its harmonic vector and takes the nearest
// vocabulary word not already in its own list. The class stops at T keywords,
// or as soon as that nearest word belongs to another class.
std::vector<ClassModel> expand_keywords(const std::vector<ClassSpec>& classes, const StaticWordTable& table,
                                        int keyword_count);

std::vector<Vec> class_vectors(const std::vector<ClassModel>& models);

// Sentence vector as a class-oriented weighted mean of its word vectors.
// Word weight: max(0, max_k cos(v, c_k) - cos(v, c_avg)), normalized;
// uniform when every raw weight is zero.
SentenceRepr sentence_representation(const TokenMatrix& tokens, const std::vector<Vec>& class_vecs);
SentenceRepr sentence_representation(const TokenMatrix& tokens, const std::vector<ClassModel>& models);

// Stacks sentence representations of each document into |d| x h matrices.
std::vector<Mat> sentence_matrices(const std::vector<DocTokens>& tokens, const std::vector<Vec>& class_vecs,
                                   int threads = 1);

nlohmann::json keywords_to_json(const std::vector<ClassModel>& models);

}  // namespace megclass
