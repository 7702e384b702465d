#include "megclass/embeddings.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace megclass {

namespace {

constexpr std::string_view kTokenMagic = "MEGTOKv1";
constexpr std::string_view kStaticMagic = "MEGSTAv1";
constexpr std::string_view kFooter("MEGEND\0\0", 8);
constexpr std::uint32_t kCacheVersion = 1;

std::string sentence_ref(const std::string& doc_id, int sent_index) {
  return doc_id + "#" + std::to_string(sent_index);
}

void write_header(BinaryWriter& w, std::string_view magic, const CacheHeader& h) {
  w.bytes(magic);
  w.u32(kCacheVersion);
  w.u64(h.fingerprint);
  w.u32(static_cast<std::uint32_t>(h.dim));
  w.str(h.provider_id);
}

CacheHeader read_header(BinaryReader& r, std::string_view magic) {
  if (r.bytes(magic.size()) != magic) throw CacheError(r.source() + ": not a megclass cache of the expected kind");
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion) {
    throw CacheError(r.source() + ": cache version " + std::to_string(version) + " unsupported; re-run `embed`");
  }
  CacheHeader h;
  h.fingerprint = r.u64();
  h.dim = static_cast<int>(r.u32());
  h.provider_id = r.str();
  return h;
}

void check_fingerprint(const BinaryReader& r, const CacheHeader& h, std::uint64_t expected) {
  if (h.fingerprint != expected) {
    throw CacheError(r.source() + ": corpus fingerprint " + hex64(h.fingerprint) + " does not match corpus " +
                     hex64(expected) + "; re-run `embed` to re-embed the corpus");
  }
}

void read_footer(BinaryReader& r, std::uint64_t expected_count) {
  if (r.bytes(kFooter.size()) != kFooter || r.u64() != expected_count || !r.at_end()) {
    throw CacheError(r.source() + ": corrupt or truncated cache");
  }
}

}  // namespace

PrecomputedProvider::PrecomputedProvider(int dim, std::string provider_id,
                                         std::map<std::string, std::vector<RawEncoding>> encodings)
    : dim_(dim), provider_id_(std::move(provider_id)), encodings_(std::move(encodings)) {
  if (dim_ <= 0) throw ConfigError("embedding dimension must be positive");
}

RawEncoding PrecomputedProvider::encode(const std::string& doc_id, const Sentence& sentence) const {
  auto it = encodings_.find(doc_id);
  if (it == encodings_.end()) throw ProviderError(doc_id, sentence.sent_index, "document not in precomputed set");
  if (sentence.sent_index < 0 || sentence.sent_index >= static_cast<int>(it->second.size())) {
    throw ProviderError(doc_id, sentence.sent_index, "sentence not in precomputed set");
  }
  return it->second[static_cast<std::size_t>(sentence.sent_index)];
}

PrecomputedProvider PrecomputedProvider::load(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("precomputed embeddings: missing " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  const int dim = manifest.at("dim").get<int>();
  const std::string provider_id = manifest.value("provider_id", std::string("precomputed"));
  std::map<std::string, std::vector<RawEncoding>> encodings;
  for (const auto& doc : manifest.at("documents")) {
    const std::string id = doc.at("id").get<std::string>();
    const auto file = dir / doc.at("file").get<std::string>();
    BinaryReader r(read_file(file), file.string());
    std::vector<RawEncoding> sents;
    for (const auto& js : doc.at("sentences")) {
      RawEncoding enc;
      enc.token_to_word = js.at("token_to_word").get<std::vector<int>>();
      enc.subword_vectors.resize(static_cast<Eigen::Index>(enc.token_to_word.size()), dim);
      r.f32_span({enc.subword_vectors.data(), static_cast<std::size_t>(enc.subword_vectors.size())});
      sents.push_back(std::move(enc));
    }
    if (!r.at_end()) throw DataError(file.string() + ": size does not match manifest");
    encodings.emplace(id, std::move(sents));
  }
  return PrecomputedProvider(dim, provider_id, std::move(encodings));
}

void PrecomputedProvider::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json docs = nlohmann::json::array();
  std::size_t index = 0;
  for (const auto& [id, sents] : encodings_) {
    const std::string file = "doc" + std::to_string(index++) + ".f32";
    BinaryWriter w;
    nlohmann::json js_sents = nlohmann::json::array();
    for (const RawEncoding& enc : sents) {
      w.f32_span({enc.subword_vectors.data(), static_cast<std::size_t>(enc.subword_vectors.size())});
      js_sents.push_back({{"token_to_word", enc.token_to_word}});
    }
    write_file_atomic(dir / file, w.buffer());
    docs.push_back({{"id", id}, {"file", file}, {"sentences", js_sents}});
  }
  const nlohmann::json manifest = {{"format", "megclass-precomputed"},
                                   {"version", 1},
                                   {"dim", dim_},
                                   {"provider_id", provider_id_},
                                   {"documents", docs}};
  write_file_atomic(dir / "manifest.json", manifest.dump(1));
}

TokenMatrix pool_subwords(const std::string& doc_id, const Sentence& sentence, const RawEncoding& raw) {
  const auto n_words = static_cast<Eigen::Index>(sentence.words.size());
  const Eigen::Index n_sub = raw.subword_vectors.rows();
  const std::string where = sentence_ref(doc_id, sentence.sent_index);
  if (static_cast<Eigen::Index>(raw.token_to_word.size()) != n_sub) {
    throw DataError(where + ": alignment length does not match subword count");
  }
  Mat sums = Mat::Zero(n_words, raw.subword_vectors.cols());
  std::vector<int> counts(static_cast<std::size_t>(n_words), 0);
  for (Eigen::Index t = 0; t < n_sub; ++t) {
    const int w = raw.token_to_word[static_cast<std::size_t>(t)];
    if (w < 0 || w >= n_words) throw DataError(where + ": subword aligned to a word outside the sentence");
    sums.row(w) += raw.subword_vectors.row(t).cast<double>();
    ++counts[static_cast<std::size_t>(w)];
  }
  TokenMatrix tm;
  tm.doc_id = doc_id;
  tm.sent_index = sentence.sent_index;
  tm.token_to_word = raw.token_to_word;
  tm.vectors.resize(n_words, raw.subword_vectors.cols());
  for (Eigen::Index w = 0; w < n_words; ++w) {
    if (counts[static_cast<std::size_t>(w)] == 0) {
      throw DataError(where + ": word '" + sentence.words[static_cast<std::size_t>(w)] + "' has no subwords");
    }
    tm.vectors.row(w) = (sums.row(w) / counts[static_cast<std::size_t>(w)]).cast<float>();
  }
  if (!tm.vectors.allFinite()) throw NumericalError(where + ": embedding contains NaN or Inf");
  return tm;
}

TokenMatrix embed_sentence(const std::string& doc_id, const Sentence& sentence,
                           const EmbeddingProvider& provider) {
  RawEncoding raw = provider.encode(doc_id, sentence);
  if (raw.subword_vectors.cols() != provider.dim()) {
    throw ProviderError(doc_id, sentence.sent_index, "vector width does not match provider dimension");
  }
  return pool_subwords(doc_id, sentence, raw);
}

std::vector<DocTokens> embed_corpus(const std::vector<Document>& docs, const EmbeddingProvider& provider,
                                    int threads) {
  std::vector<DocTokens> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const Document& d = docs[i];
    out[i].reserve(d.sentences.size());
    for (const Sentence& s : d.sentences) out[i].push_back(embed_sentence(d.doc_id, s, provider));
  });
  return out;
}

StaticWordTable::StaticWordTable(int dim, std::vector<std::string> words, std::vector<std::uint64_t> counts,
                                 MatF vectors)
    : dim_(dim), words_(std::move(words)), counts_(std::move(counts)), vectors_(std::move(vectors)) {
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<int>(i));
}

int StaticWordTable::index_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

Vec StaticWordTable::vector(const std::string& word) const {
  const int i = index_of(word);
  if (i < 0) throw DataError("word '" + word + "' not in static vocabulary");
  return vectors_.row(i).transpose().cast<double>();
}

std::uint64_t StaticWordTable::count(const std::string& word) const {
  const int i = index_of(word);
  return i < 0 ? 0 : counts_[static_cast<std::size_t>(i)];
}

StaticWordTable build_static_table(const std::vector<Document>& docs, const std::vector<DocTokens>& tokens,
                                   std::uint64_t min_count) {
  if (docs.empty()) throw DataError("cannot build a static word table from an empty corpus");
  if (docs.size() != tokens.size()) throw DataError("token matrices do not align with documents");
  int dim = -1;
  std::map<std::string, std::pair<std::uint64_t, Vec>> acc;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = 0; j < docs[i].sentences.size(); ++j) {
      const Sentence& s = docs[i].sentences[j];
      const TokenMatrix& tm = tokens[i][j];
      if (dim < 0) dim = static_cast<int>(tm.vectors.cols());
      for (std::size_t w = 0; w < s.words.size(); ++w) {
        auto [it, fresh] = acc.try_emplace(s.words[w], 0, Vec::Zero(dim));
        it->second.first += 1;
        it->second.second += tm.vectors.row(static_cast<Eigen::Index>(w)).transpose().cast<double>();
      }
    }
  }
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (const auto& [w, entry] : acc) {
    if (entry.first >= min_count) {
      words.push_back(w);
      counts.push_back(entry.first);
    }
  }
  MatF vectors(static_cast<Eigen::Index>(words.size()), dim);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& entry = acc.at(words[i]);
    vectors.row(static_cast<Eigen::Index>(i)) =
        (entry.second / static_cast<double>(entry.first)).transpose().cast<float>();
  }
  return StaticWordTable(dim, std::move(words), std::move(counts), std::move(vectors));
}

std::uint64_t corpus_fingerprint(const std::vector<Document>& docs) {
  Fnv1a h;
  for (const Document& d : docs) {
    h.update(d.doc_id);
    h.update(std::string_view("\0", 1));
    h.update_u64(d.raw_text.size());
  }
  return h.digest();
}

void write_token_cache(const std::filesystem::path& path, const CacheHeader& header,
                       const std::vector<DocTokens>& tokens) {
  BinaryWriter w;
  write_header(w, kTokenMagic, header);
  w.u64(tokens.size());
  for (const DocTokens& doc : tokens) {
    w.str(doc.empty() ? std::string() : doc.front().doc_id);
    w.u32(static_cast<std::uint32_t>(doc.size()));
    for (const TokenMatrix& tm : doc) {
      if (tm.vectors.cols() != header.dim) throw CacheError("token matrix width does not match cache header");
      w.u32(static_cast<std::uint32_t>(tm.sent_index));
      w.u32(static_cast<std::uint32_t>(tm.vectors.rows()));
      w.u32(static_cast<std::uint32_t>(tm.token_to_word.size()));
      for (const int t : tm.token_to_word) w.u32(static_cast<std::uint32_t>(t));
      w.f32_span({tm.vectors.data(), static_cast<std::size_t>(tm.vectors.size())});
    }
  }
  w.bytes(kFooter);
  w.u64(tokens.size());
  write_file_atomic(path, w.buffer());
}

std::vector<DocTokens> read_token_cache(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
  BinaryReader r(read_file(path), path.string());
  const CacheHeader h = read_header(r, kTokenMagic);
  check_fingerprint(r, h, expected_fingerprint);
  const std::uint64_t n_docs = r.u64();
  std::vector<DocTokens> out;
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    const std::string doc_id = r.str();
    const std::uint32_t n_sent = r.u32();
    DocTokens doc;
    for (std::uint32_t j = 0; j < n_sent; ++j) {
      TokenMatrix tm;
      tm.doc_id = doc_id;
      tm.sent_index = static_cast<int>(r.u32());
      const std::uint32_t rows = r.u32();
      const std::uint32_t n_align = r.u32();
      tm.token_to_word.resize(n_align);
      for (auto& t : tm.token_to_word) t = static_cast<int>(r.u32());
      tm.vectors.resize(rows, h.dim);
      r.f32_span({tm.vectors.data(), static_cast<std::size_t>(tm.vectors.size())});
      doc.push_back(std::move(tm));
    }
    out.push_back(std::move(doc));
  }
  read_footer(r, n_docs);
  return out;
}

void write_static_cache(const std::filesystem::path& path, const CacheHeader& header,
                        const StaticWordTable& table) {
  BinaryWriter w;
  write_header(w, kStaticMagic, header);
  w.u64(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    w.str(table.words()[i]);
    w.u64(table.counts()[i]);
    const auto row = table.vectors().row(static_cast<Eigen::Index>(i));
    w.f32_span({row.data(), static_cast<std::size_t>(row.size())});
  }
  w.bytes(kFooter);
  w.u64(table.size());
  write_file_atomic(path, w.buffer());
}

StaticWordTable read_static_cache(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
  BinaryReader r(read_file(path), path.string());
  const CacheHeader h = read_header(r, kStaticMagic);
  check_fingerprint(r, h, expected_fingerprint);
  const std::uint64_t n = r.u64();
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::vector<float> flat;
  for (std::uint64_t i = 0; i < n; ++i) {
    words.push_back(r.str());
    counts.push_back(r.u64());
    const std::size_t off = flat.size();
    flat.resize(off + static_cast<std::size_t>(h.dim));
    r.f32_span({flat.data() + off, static_cast<std::size_t>(h.dim)});
  }
  read_footer(r, n);
  MatF vectors = Eigen::Map<MatF>(flat.data(), static_cast<Eigen::Index>(n), h.dim);
  return StaticWordTable(h.dim, std::move(words), std::move(counts), std::move(vectors));
}

CacheHeader read_cache_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open " + path.string());
  std::string head(4096, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const std::string_view magic = std::string_view(head).substr(0, 8);
  BinaryReader r(head, path.string());
  return read_header(r, magic == kStaticMagic ? kStaticMagic : kTokenMagic);
}

}  // namespace megclass
