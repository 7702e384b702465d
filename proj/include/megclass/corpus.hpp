#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace megclass {

inline constexpr int kDefaultMaxSentenceLen = 150;

struct CharSpan {
  std::size_t begin = 0;  // inclusive byte offset into raw_text
  std::size_t end = 0;    // exclusive

  bool operator==(const CharSpan&) const = default;
};

struct Sentence {
  int sent_index = 0;
  std::vector<std::string> words;  // lowercased
  CharSpan char_span;

  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string doc_id;
  std::string raw_text;
  std::vector<Sentence> sentences;

  bool operator==(const Document&) const = default;
};

struct ClassSpec {
  int class_id = 0;
  std::string surface_name;         // as written in the classes file
  std::vector<std::string> words;   // tokenized, lowercased

  bool is_phrase() const { return words.size() > 1; }
  bool operator==(const ClassSpec&) const = default;
};

enum class CorpusFormat { kJsonl, kOneDocPerLine };

CorpusFormat parse_corpus_format(const std::string& name);

struct SegmenterOptions {
  std::string terminals = ".!?";
  // Only split when the next sentence starts with an uppercase letter or digit.
  bool require_capital = true;
  int max_sentence_len = kDefaultMaxSentenceLen;
};

// Sentence splitter interface; the rule-based splitter below is the default.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<Sentence> segment(const std::string& text) const = 0;
};

class RuleBasedSegmenter : public Segmenter {
 public:
  explicit RuleBasedSegmenter(SegmenterOptions options = {}) : options_(std::move(options)) {}
  std::vector<Sentence> segment(const std::string& text) const override;

 private:
  SegmenterOptions options_;
};

// Lowercased alphanumeric runs. Bytes >= 0x80 count as word characters so
// UTF-8 words stay intact.
std::vector<std::string> tokenize_words(std::string_view text);

std::vector<Sentence> segment(const std::string& doc_text, const SegmenterOptions& options = {});

// Raw records as read from disk, before segmentation.
struct RawRecord {
  std::string doc_id;
  std::string text;
};

std::vector<RawRecord> read_records(const std::filesystem::path& path, CorpusFormat format);

// Reads and segments a corpus. Documents without a single word are dropped
// with a warning.
std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const Segmenter& segmenter);
std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const SegmenterOptions& options = {});

// Segments in-memory records; same drop rule as load_corpus.
std::vector<Document> build_documents(const std::vector<RawRecord>& records,
                                      const Segmenter& segmenter);

std::vector<ClassSpec> load_classes(const std::filesystem::path& path);
std::vector<ClassSpec> make_classes(const std::vector<std::string>& surface_names);

using GoldLabels = std::map<std::string, int>;

// Gold labels for evaluation. Labels may be class surface names or indices.
GoldLabels load_gold_labels(const std::filesystem::path& path, const std::vector<Document>& docs,
                            const std::vector<ClassSpec>& classes);

// Segmented-corpus artifact written by `prepare` (one JSON object per doc).
void write_segmented_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> read_segmented_corpus(const std::filesystem::path& path);

}  // namespace megclass
