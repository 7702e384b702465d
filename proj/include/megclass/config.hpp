#pragma once

#include "megclass/ensemble.hpp"
#include "megclass/feedback.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace megclass {

// Run configuration. Defaults are the reference hyperparameters; file
// format is one `key = value` per line with `#` comments.
struct RunConfig {
  std::string corpus;
  std::string corpus_format = "jsonl";
  std::string classes;
  std::string labels;  // optional, evaluation only
  std::string run_dir;

  // "precomputed" reads embeddings_dir; "hf:<model>" runs the encoder script.
  std::string provider = "precomputed";
  std::string embeddings_dir;
  int encoder_layer = -1;
  std::string encoder_script;
  std::string python = "python3";

  int keyword_count = 100;  // T
  int max_sentence_len = 150;
  int min_count = 1;
  int heads = 2;
  double tau = 0.2;
  double lr = 1e-3;
  int epochs = 4;
  int batch_size = 16;
  double k = 0.075;
  double delta = 0.5;
  int iterations = 0;  // 0 = 4 for single-word class names, 2 if any name is a phrase
  int pca_dims = 64;
  bool use_pca = true;
  std::uint64_t seed = 42;
  std::string weight_mode = "discriminative";
  int threads = 1;
  bool macro_zero_inclusion = false;
  int classifier_epochs = 300;
  double classifier_lr = 0.5;

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  void validate() const;

  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;

  std::uint64_t prepare_hash() const;
  std::uint64_t embed_hash() const;
  std::uint64_t run_hash() const;

  // Resolves relative paths against base.
  void resolve_paths(const std::filesystem::path& base);

  FeedbackConfig feedback_config(int resolved_iterations) const;
  int resolve_iterations(bool any_phrase_label) const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

}  // namespace megclass
