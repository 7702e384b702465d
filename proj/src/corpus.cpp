#include "megclass/corpus.hpp"

#include "megclass/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace megclass {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string synthesized_id(std::size_t line_index) {
  std::string digits = std::to_string(line_index);
  if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
  return digits;
}

}  // namespace

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "one-doc-per-line" || name == "lines") return CorpusFormat::kOneDocPerLine;
  throw ConfigError("unknown corpus format '" + name + "' (expected jsonl or one-doc-per-line)");
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string word;
    while (j < text.size() && is_word_byte(text[j])) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
      ++j;
    }
    words.push_back(std::move(word));
    i = j;
  }
  return words;
}

std::vector<Sentence> RuleBasedSegmenter::segment(const std::string& text) const {
  if (text.empty()) throw DataError("cannot segment empty text");

  // Candidate segments as [begin, end) with leading/trailing whitespace removed.
  std::vector<CharSpan> spans;
  const std::size_t n = text.size();
  std::size_t start = 0;
  while (start < n && is_space(text[start])) ++start;
  std::size_t i = start;
  while (i < n) {
    if (options_.terminals.find(text[i]) == std::string::npos) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && (options_.terminals.find(text[j]) != std::string::npos || is_closer(text[j]))) ++j;
    if (j < n && is_space(text[j])) {
      std::size_t k = j;
      while (k < n && is_space(text[k])) ++k;
      const auto next = static_cast<unsigned char>(k < n ? text[k] : ' ');
      const bool starts_sentence =
          k < n && (!options_.require_capital || std::isupper(next) != 0 || std::isdigit(next) != 0);
      if (starts_sentence) {
        spans.push_back({start, j});
        start = k;
        i = k;
        continue;
      }
    }
    i = j;
  }
  if (start < n) {
    std::size_t end = n;
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) spans.push_back({start, end});
  }

  // Wordless segments ("...", "--") are folded into a neighbour so the spans
  // still cover all non-whitespace content.
  std::vector<Sentence> sentences;
  std::size_t pending_begin = std::string::npos;
  for (const CharSpan& span : spans) {
    auto words = tokenize_words(std::string_view(text).substr(span.begin, span.end - span.begin));
    if (words.empty()) {
      if (!sentences.empty()) {
        sentences.back().char_span.end = span.end;
      } else if (pending_begin == std::string::npos) {
        pending_begin = span.begin;
      }
      continue;
    }
    Sentence s;
    s.sent_index = static_cast<int>(sentences.size());
    s.char_span = {pending_begin == std::string::npos ? span.begin : pending_begin, span.end};
    pending_begin = std::string::npos;
    if (options_.max_sentence_len > 0 && static_cast<int>(words.size()) > options_.max_sentence_len) {
      words.resize(static_cast<std::size_t>(options_.max_sentence_len));
    }
    s.words = std::move(words);
    sentences.push_back(std::move(s));
  }
  return sentences;
}

std::vector<Sentence> segment(const std::string& doc_text, const SegmenterOptions& options) {
  return RuleBasedSegmenter(options).segment(doc_text);
}

std::vector<RawRecord> read_records(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());

  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    RawRecord record;
    if (format == CorpusFormat::kJsonl) {
      if (trim(line).empty()) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": malformed JSON record: " + e.what());
      }
      if (!obj.is_object()) throw DataError(where + ": record is not a JSON object");
      auto text_it = obj.find("text");
      if (text_it == obj.end() || !text_it->is_string()) {
        throw DataError(where + ": record has no string field \"text\"");
      }
      record.text = text_it->get<std::string>();
      auto id_it = obj.find("id");
      if (id_it != obj.end() && !id_it->is_null()) {
        if (id_it->is_string()) {
          record.doc_id = id_it->get<std::string>();
        } else if (id_it->is_number_integer()) {
          record.doc_id = std::to_string(id_it->get<long long>());
        } else {
          throw DataError(where + ": field \"id\" must be a string");
        }
      } else {
        record.doc_id = synthesized_id(line_no - 1);
      }
    } else {
      record.text = line;
      record.doc_id = synthesized_id(line_no - 1);
    }
    if (trim(record.text).empty()) throw DataError(where + ": record has empty text");
    records.push_back(std::move(record));
  }
  if (records.empty()) throw DataError("corpus file " + path.string() + " contains no records");
  return records;
}

std::vector<Document> build_documents(const std::vector<RawRecord>& records,
                                      const Segmenter& segmenter) {
  std::vector<Document> docs;
  docs.reserve(records.size());
  std::set<std::string> seen;
  for (const RawRecord& r : records) {
    if (!seen.insert(r.doc_id).second) throw DataError("duplicate document id '" + r.doc_id + "'");
    Document doc;
    doc.doc_id = r.doc_id;
    doc.raw_text = r.text;
    doc.sentences = segmenter.segment(r.text);
    if (doc.sentences.empty()) {
      spdlog::warn("dropping document '{}': no words after tokenization", r.doc_id);
      continue;
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw DataError("no document survived tokenization");
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const Segmenter& segmenter) {
  return build_documents(read_records(path, format), segmenter);
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                  const SegmenterOptions& options) {
  return load_corpus(path, format, RuleBasedSegmenter(options));
}

std::vector<ClassSpec> make_classes(const std::vector<std::string>& surface_names) {
  std::vector<ClassSpec> classes;
  std::set<std::string> seen;
  for (const std::string& raw : surface_names) {
    ClassSpec spec;
    spec.class_id = static_cast<int>(classes.size());
    spec.surface_name = trim(raw);
    spec.words = tokenize_words(spec.surface_name);
    if (spec.words.empty()) throw DataError("class name '" + raw + "' has no words");
    std::string key;
    for (const auto& w : spec.words) key += w + " ";
    if (!seen.insert(key).second) throw DataError("duplicate class name '" + spec.surface_name + "'");
    classes.push_back(std::move(spec));
  }
  if (classes.size() < 2) throw DataError("at least 2 classes are required");
  return classes;
}

std::vector<ClassSpec> load_classes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open classes file " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) names.push_back(line);
  }
  return make_classes(names);
}

GoldLabels load_gold_labels(const std::filesystem::path& path, const std::vector<Document>& docs,
                            const std::vector<ClassSpec>& classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file " + path.string());
  std::set<std::string> known;
  for (const auto& d : docs) known.insert(d.doc_id);

  GoldLabels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed JSON record: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("label")) {
      throw DataError(where + ": expected fields \"id\" and \"label\"");
    }
    const std::string id = obj["id"].is_string() ? obj["id"].get<std::string>() : obj["id"].dump();
    if (!known.contains(id)) throw DataError(where + ": unknown document id '" + id + "'");
    const auto& label = obj["label"];
    int class_id = -1;
    if (label.is_number_integer()) {
      class_id = label.get<int>();
    } else if (label.is_string()) {
      const std::string name = label.get<std::string>();
      const auto words = tokenize_words(name);
      for (const auto& c : classes) {
        if (c.surface_name == name || c.words == words) class_id = c.class_id;
      }
    }
    if (class_id < 0 || class_id >= static_cast<int>(classes.size())) {
      throw DataError(where + ": unknown class label " + label.dump());
    }
    labels[id] = class_id;
  }
  return labels;
}

void write_segmented_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const Document& d : docs) {
    nlohmann::json sents = nlohmann::json::array();
    for (const Sentence& s : d.sentences) {
      sents.push_back({{"span", {s.char_span.begin, s.char_span.end}}, {"words", s.words}});
    }
    out << nlohmann::json{{"id", d.doc_id}, {"text", d.raw_text}, {"sentences", sents}}.dump() << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Document> read_segmented_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PrerequisiteError("segmented corpus " + path.string() + " not found; run `prepare` first");
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      Document d;
      d.doc_id = obj.at("id").get<std::string>();
      d.raw_text = obj.at("text").get<std::string>();
      for (const auto& js : obj.at("sentences")) {
        Sentence s;
        s.sent_index = static_cast<int>(d.sentences.size());
        s.char_span = {js.at("span").at(0).get<std::size_t>(), js.at("span").at(1).get<std::size_t>()};
        s.words = js.at("words").get<std::vector<std::string>>();
        d.sentences.push_back(std::move(s));
      }
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace megclass
