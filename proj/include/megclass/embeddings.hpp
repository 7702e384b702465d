#pragma once

#include "megclass/corpus.hpp"
#include "megclass/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace megclass {

inline constexpr int kDefaultHiddenDim = 768;

// Raw provider output for one sentence: one row per subword token, plus the
// word each subword belongs to.
struct RawEncoding {
  MatF subword_vectors;
  std::vector<int> token_to_word;
};

// Word-level contextual vectors for one sentence (|words| x h).
struct TokenMatrix {
  std::string doc_id;
  int sent_index = 0;
  MatF vectors;
  std::vector<int> token_to_word;

  int rows() const { return static_cast<int>(vectors.rows()); }
  bool operator==(const TokenMatrix& o) const {
    return doc_id == o.doc_id && sent_index == o.sent_index && token_to_word == o.token_to_word &&
           vectors.rows() == o.vectors.rows() && vectors.cols() == o.vectors.cols() &&
           vectors == o.vectors;
  }
};

using DocTokens = std::vector<TokenMatrix>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  // Throws ProviderError on failure.
  virtual RawEncoding encode(const std::string& doc_id, const Sentence& sentence) const = 0;
};

// Serves vectors from user-supplied files, or from memory. The on-disk layout
// is a directory holding manifest.json and one little-endian float32 file per
// document (all subword rows of all sentences, concatenated).
class PrecomputedProvider : public EmbeddingProvider {
 public:
  PrecomputedProvider(int dim, std::string provider_id,
                      std::map<std::string, std::vector<RawEncoding>> encodings);

  static PrecomputedProvider load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  std::string id() const override { return provider_id_; }
  int dim() const override { return dim_; }
  RawEncoding encode(const std::string& doc_id, const Sentence& sentence) const override;

 private:
  int dim_;
  std::string provider_id_;
  std::map<std::string, std::vector<RawEncoding>> encodings_;
};

// Mean-pools subword vectors into one row per word.
TokenMatrix pool_subwords(const std::string& doc_id, const Sentence& sentence, const RawEncoding& raw);

TokenMatrix embed_sentence(const std::string& doc_id, const Sentence& sentence,
                           const EmbeddingProvider& provider);

std::vector<DocTokens> embed_corpus(const std::vector<Document>& docs, const EmbeddingProvider& provider,
                                    int threads = 1);

// Corpus-level static word vectors: each word's vector is the mean of its
// contextualized occurrence vectors.
class StaticWordTable {
 public:
  StaticWordTable() = default;
  StaticWordTable(int dim, std::vector<std::string> words, std::vector<std::uint64_t> counts, MatF vectors);

  int dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  const MatF& vectors() const { return vectors_; }

  bool contains(const std::string& word) const { return index_.contains(word); }
  // -1 if absent.
  int index_of(const std::string& word) const;
  Vec vector(const std::string& word) const;
  std::uint64_t count(const std::string& word) const;

  bool operator==(const StaticWordTable& o) const {
    return dim_ == o.dim_ && words_ == o.words_ && counts_ == o.counts_ && vectors_ == o.vectors_;
  }

 private:
  int dim_ = 0;
  std::vector<std::string> words_;  // sorted
  std::vector<std::uint64_t> counts_;
  MatF vectors_;
  std::unordered_map<std::string, int> index_;
};

StaticWordTable build_static_table(const std::vector<Document>& docs, const std::vector<DocTokens>& tokens,
                                   std::uint64_t min_count = 1);

// Hash of doc ids and text lengths; binds caches to the corpus they came from.
std::uint64_t corpus_fingerprint(const std::vector<Document>& docs);

struct CacheHeader {
  std::uint64_t fingerprint = 0;
  int dim = 0;
  std::string provider_id;
};

void write_token_cache(const std::filesystem::path& path, const CacheHeader& header,
                       const std::vector<DocTokens>& tokens);
// Throws CacheError on version/fingerprint mismatch or truncation.
std::vector<DocTokens> read_token_cache(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

void write_static_cache(const std::filesystem::path& path, const CacheHeader& header,
                        const StaticWordTable& table);
StaticWordTable read_static_cache(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

CacheHeader read_cache_header(const std::filesystem::path& path);

}  // namespace megclass
