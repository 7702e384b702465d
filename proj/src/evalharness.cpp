#include "megclass/evalharness.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace megclass {

EvalReport f1_scores(const GoldLabels& gold, const Predictions& predicted, int num_classes, bool zero_inclusion,
                     std::string stage) {
  if (gold.size() != predicted.size()) throw DataError("gold and predicted label sets differ in size");
  std::vector<int> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> gold_count(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> pred_count(static_cast<std::size_t>(num_classes), 0);
  int correct = 0;
  for (const auto& [id, g] : gold) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw DataError("document '" + id + "' has a gold label but no prediction");
    const int p = it->second;
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) throw DataError("label out of range for " + id);
    ++gold_count[static_cast<std::size_t>(g)];
    ++pred_count[static_cast<std::size_t>(p)];
    if (g == p) {
      ++tp[static_cast<std::size_t>(g)];
      ++correct;
    }
  }
  EvalReport r;
  r.stage = std::move(stage);
  r.num_docs = gold.size();
  r.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  // Single-label: every error is one FP and one FN, so micro P = R = accuracy.
  r.micro_f1 = r.accuracy;
  double macro_sum = 0.0;
  int macro_n = 0;
  for (int k = 0; k < num_classes; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    ClassScores cs;
    cs.support = gold_count[kk];
    cs.predicted = pred_count[kk];
    cs.precision = pred_count[kk] > 0 ? static_cast<double>(tp[kk]) / pred_count[kk] : 0.0;
    cs.recall = gold_count[kk] > 0 ? static_cast<double>(tp[kk]) / gold_count[kk] : 0.0;
    cs.f1 = cs.precision + cs.recall > 0.0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    if (zero_inclusion || gold_count[kk] > 0 || pred_count[kk] > 0) {
      macro_sum += cs.f1;
      ++macro_n;
    }
    r.per_class.push_back(cs);
  }
  r.macro_f1 = macro_n > 0 ? macro_sum / macro_n : 0.0;
  return r;
}

Predictions to_predictions(const std::vector<ScoredDoc>& scored) {
  Predictions out;
  for (const auto& s : scored) out.emplace(s.doc_id, s.pseudo_label);
  return out;
}

Predictions argmax_predictions(const std::vector<ClassDistribution>& dists) {
  Predictions out;
  for (const auto& d : dists) out.emplace(d.doc_id, d.argmax());
  return out;
}

Predictions restrict_to(const Predictions& predicted, const GoldLabels& gold) {
  Predictions out;
  for (const auto& [id, label] : gold) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw DataError("no prediction for gold document '" + id + "'");
    out.emplace(id, it->second);
  }
  return out;
}

EvalReport ablation(AblationStage stage, const FeedbackResult& state, const GoldLabels& gold, int num_classes,
                    bool zero_inclusion) {
  if (stage == AblationStage::kMegInit) {
    if (state.initial_targets.empty()) throw PrerequisiteError("MEG-Init needs the initial class distributions");
    return f1_scores(gold, restrict_to(argmax_predictions(state.initial_targets), gold), num_classes, zero_inclusion,
                     "MEG-Init");
  }
  if (state.iterations.empty()) throw PrerequisiteError("MEG-CX needs a completed first iteration");
  return f1_scores(gold, restrict_to(to_predictions(state.iterations.front().scores), gold), num_classes,
                   zero_inclusion, "MEG-CX");
}

EvalReport topk_accuracy(const std::vector<ScoredDoc>& scored, const GoldLabels& gold, double k, int num_classes,
                         bool zero_inclusion) {
  const Selection sel = select_top_k(scored, k, num_classes);
  const Predictions all = to_predictions(scored);
  GoldLabels sub_gold;
  Predictions sub_pred;
  for (const auto& [cls, ids] : sel) {
    for (const auto& id : ids) {
      auto g = gold.find(id);
      if (g == gold.end()) continue;
      sub_gold.emplace(id, g->second);
      sub_pred.emplace(id, all.at(id));
    }
  }
  if (sub_gold.empty()) throw DataError("top-k selection contains no labeled documents");
  return f1_scores(sub_gold, sub_pred, num_classes, zero_inclusion, "top-k-subset");
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    per.push_back({{"precision", c.precision},
                   {"recall", c.recall},
                   {"f1", c.f1},
                   {"support", c.support},
                   {"predicted", c.predicted}});
  }
  return {{"stage", r.stage},          {"micro_f1", r.micro_f1}, {"macro_f1", r.macro_f1},
          {"accuracy", r.accuracy},    {"num_docs", r.num_docs}, {"per_class", per}};
}

namespace {

const std::vector<std::string>& base_class_names() {
  static const std::vector<std::string> names = {"sports",   "politics", "science", "business", "health",
                                                 "travel",   "music",    "food",    "education", "law",
                                                 "weather",  "fashion"};
  return names;
}

std::string letters(int index, int width) {
  std::string s(static_cast<std::size_t>(width), 'a');
  for (int i = width - 1; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = static_cast<char>('a' + index % 26);
    index /= 26;
  }
  return s;
}

Vec gaussian(std::mt19937_64& rng, int dim, double std) {
  std::normal_distribution<double> nd(0.0, std);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = nd(rng);
  return v;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.classes < 2 || cfg.docs_per_class < 1 || cfg.sents_per_doc < 1 || cfg.words_per_sentence < 1 ||
      cfg.vocab_per_class < 1 || cfg.filler_vocab < 1) {
    throw ConfigError("synthetic corpus: counts must be positive and classes >= 2");
  }
  if (!(cfg.purity > 0.5 && cfg.purity <= 1.0)) throw ConfigError("synthetic corpus: purity must lie in (0.5, 1]");
  if (cfg.noise_std < 0.0 || cfg.word_spread < 0.0) throw ConfigError("synthetic corpus: negative noise");
  if (cfg.dim < cfg.classes) throw ConfigError("synthetic corpus: dim must be >= number of classes");
  if (!(cfg.topic_word_ratio > 0.0 && cfg.topic_word_ratio <= 1.0)) {
    throw ConfigError("synthetic corpus: topic_word_ratio must lie in (0, 1]");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Orthonormal class directions.
  std::vector<Vec> directions;
  for (int k = 0; k < cfg.classes; ++k) {
    Vec v = gaussian(rng, cfg.dim, 1.0);
    for (const Vec& u : directions) v -= v.dot(u) * u;
    directions.push_back(v.normalized());
  }

  std::vector<std::string> names;
  for (int k = 0; k < cfg.classes; ++k) {
    const auto& base = base_class_names();
    names.push_back(k < static_cast<int>(base.size()) ? base[static_cast<std::size_t>(k)]
                                                      : "topic" + letters(k, 2));
  }

  std::map<std::string, Vec> word_vec;
  std::vector<std::vector<std::string>> class_vocab(static_cast<std::size_t>(cfg.classes));
  for (int k = 0; k < cfg.classes; ++k) {
    auto& vocab = class_vocab[static_cast<std::size_t>(k)];
    vocab.push_back(names[static_cast<std::size_t>(k)]);
    const Vec& dir = directions[static_cast<std::size_t>(k)];
    Vec off = gaussian(rng, cfg.dim, 1.0);
    off -= off.dot(dir) * dir;
    word_vec[names[static_cast<std::size_t>(k)]] = (dir + cfg.name_offset * off.normalized()).normalized();
    const std::string prefix = names[static_cast<std::size_t>(k)].substr(0, 3);
    for (int w = 1; w < cfg.vocab_per_class; ++w) {
      const std::string word = prefix + "x" + letters(w, 2);
      const Vec g = gaussian(rng, cfg.dim, 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
      word_vec[word] = (directions[static_cast<std::size_t>(k)] + cfg.word_spread * g).normalized();
      vocab.push_back(word);
    }
  }
  std::vector<std::string> fillers;
  for (int w = 0; w < cfg.filler_vocab; ++w) {
    const std::string word = "zq" + letters(w, 3);
    word_vec[word] = gaussian(rng, cfg.dim, 1.0).normalized();
    fillers.push_back(word);
  }

  struct PlannedDoc {
    int label;
    std::vector<int> topics;
  };
  std::vector<PlannedDoc> plan;
  for (int k = 0; k < cfg.classes; ++k) {
    for (int i = 0; i < cfg.docs_per_class; ++i) {
      PlannedDoc d{k, {}};
      for (int s = 0; s < cfg.sents_per_doc; ++s) {
        if (unif(rng) < cfg.purity) {
          d.topics.push_back(k);
        } else {
          int other = static_cast<int>(unif(rng) * (cfg.classes - 1));
          other = std::min(other, cfg.classes - 2);
          d.topics.push_back(other >= k ? other + 1 : other);
        }
      }
      if (cfg.leading_bias) {
        std::stable_partition(d.topics.begin(), d.topics.end(), [k](int t) { return t == k; });
      }
      plan.push_back(std::move(d));
    }
  }
  std::shuffle(plan.begin(), plan.end(), rng);

  SyntheticCorpus out{{}, {}, make_classes(names), {}, PrecomputedProvider(cfg.dim, "synthetic", {}), {}};
  std::map<std::string, std::vector<RawEncoding>> encodings;
  std::vector<bool> name_used(static_cast<std::size_t>(cfg.classes), false);
  SegmenterOptions seg_options;
  seg_options.max_sentence_len = std::max(cfg.words_per_sentence, kDefaultMaxSentenceLen);
  const RuleBasedSegmenter segmenter(seg_options);

  for (std::size_t di = 0; di < plan.size(); ++di) {
    const PlannedDoc& pd = plan[di];
    std::string id = std::to_string(di);
    id.insert(0, 6 - std::min<std::size_t>(6, id.size()), '0');
    id = "syn" + id;
    std::string text;
    std::vector<RawEncoding> sent_enc;
    for (const int topic : pd.topics) {
      const auto& vocab = class_vocab[static_cast<std::size_t>(topic)];
      std::vector<std::string> words;
      bool has_topic_word = false;
      for (int w = 0; w < cfg.words_per_sentence; ++w) {
        if (unif(rng) < cfg.topic_word_ratio || (!has_topic_word && w == cfg.words_per_sentence - 1)) {
          std::size_t pick = static_cast<std::size_t>(unif(rng) * static_cast<double>(vocab.size()));
          pick = std::min(pick, vocab.size() - 1);
          if (!name_used[static_cast<std::size_t>(topic)]) pick = 0;
          name_used[static_cast<std::size_t>(topic)] = name_used[static_cast<std::size_t>(topic)] || pick == 0;
          words.push_back(vocab[pick]);
          has_topic_word = true;
        } else {
          std::size_t pick = static_cast<std::size_t>(unif(rng) * static_cast<double>(fillers.size()));
          words.push_back(fillers[std::min(pick, fillers.size() - 1)]);
        }
      }
      // Sentence-level shift shared by all tokens, plus per-token noise.
      const Vec shift = gaussian(rng, cfg.dim, cfg.noise_std);
      RawEncoding enc;
      std::vector<Vec> rows;
      for (std::size_t w = 0; w < words.size(); ++w) {
        const Vec token = word_vec.at(words[w]) + shift + gaussian(rng, cfg.dim, cfg.noise_std);
        if (words[w].size() > 6) {
          const Vec delta = gaussian(rng, cfg.dim, 0.05);
          rows.push_back(token + delta);
          rows.push_back(token - delta);
          enc.token_to_word.push_back(static_cast<int>(w));
          enc.token_to_word.push_back(static_cast<int>(w));
        } else {
          rows.push_back(token);
          enc.token_to_word.push_back(static_cast<int>(w));
        }
      }
      enc.subword_vectors.resize(static_cast<Eigen::Index>(rows.size()), cfg.dim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        enc.subword_vectors.row(static_cast<Eigen::Index>(r)) = rows[r].transpose().cast<float>();
      }
      sent_enc.push_back(std::move(enc));

      std::string sentence;
      for (const auto& w : words) sentence += (sentence.empty() ? "" : " ") + w;
      sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
      text += (text.empty() ? "" : " ") + sentence + ".";
    }
    encodings.emplace(id, std::move(sent_enc));
    out.records.push_back({id, text});
    out.gold.emplace(id, pd.label);
    out.sentence_topics.push_back(pd.topics);
  }
  for (int k = 0; k < cfg.classes; ++k) {
    if (!name_used[static_cast<std::size_t>(k)]) {
      throw ConfigError("synthetic corpus: class '" + names[static_cast<std::size_t>(k)] +
                        "' never appears; increase docs_per_class or purity");
    }
  }
  out.docs = build_documents(out.records, segmenter);
  if (out.docs.size() != out.records.size()) throw Error("synthetic corpus: segmentation dropped documents");
  for (std::size_t i = 0; i < out.docs.size(); ++i) {
    if (out.docs[i].sentences.size() != out.sentence_topics[i].size()) {
      throw Error("synthetic corpus: segmentation does not match generated sentences");
    }
  }
  out.provider = PrecomputedProvider(cfg.dim, "synthetic", std::move(encodings));
  return out;
}

void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  std::ostringstream docs;
  std::ostringstream labels;
  for (const auto& r : corpus.records) {
    docs << nlohmann::json{{"id", r.doc_id}, {"text", r.text}}.dump() << '\n';
    labels << nlohmann::json{{"id", r.doc_id}, {"label", corpus.gold.at(r.doc_id)}}.dump() << '\n';
  }
  std::ostringstream classes;
  for (const auto& c : corpus.classes) classes << c.surface_name << '\n';
  write_file_atomic(dir / "corpus.jsonl", docs.str());
  write_file_atomic(dir / "labels.jsonl", labels.str());
  write_file_atomic(dir / "classes.txt", classes.str());
  corpus.provider.save(dir / "embeddings");
}

}  // namespace megclass
