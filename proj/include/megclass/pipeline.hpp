#pragma once

#include "megclass/class_repr.hpp"
#include "megclass/config.hpp"
#include "megclass/corpus.hpp"
#include "megclass/embeddings.hpp"
#include "megclass/evalharness.hpp"
#include "megclass/feedback.hpp"
#include "megclass/pseudo_dataset.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace megclass {

struct PipelineOptions {
  int keyword_count = kDefaultKeywordCount;
  FeedbackConfig feedback;
  double delta = kDefaultDelta;
  LogisticConfig classifier;
  bool train_classifier = true;
  bool zero_inclusion = false;
  int threads = 1;
};

PipelineOptions pipeline_options(const RunConfig& config, int resolved_iterations);

struct IterationMetrics {
  int iteration = 0;  // 0 = initial ensemble
  EvalReport reduced;
  std::optional<EvalReport> raw;
  std::optional<EvalReport> topk;
  double final_loss = 0.0;
};

struct PipelineResult {
  std::vector<ClassModel> initial_models;
  std::vector<std::string> doc_ids;
  std::vector<Mat> sentences;
  FeedbackResult feedback;
  std::vector<PseudoExample> pseudo_set;
  Predictions classifier_predictions;

  // Filled only when gold labels are given.
  std::vector<IterationMetrics> metrics;
  std::optional<EvalReport> classifier_report;
};

// Keyword expansion through pseudo-labeling on an already embedded corpus.
PipelineResult run_pipeline(const std::vector<Document>& docs, const std::vector<ClassSpec>& classes,
                            const std::vector<DocTokens>& tokens, const StaticWordTable& table,
                            const GoldLabels* gold, const PipelineOptions& options,
                            const IterationObserver& observer = {});

// Exclusive advisory lock on <run_dir>/.lock for the lifetime of the object.
class RunDirLock {
 public:
  explicit RunDirLock(const std::filesystem::path& run_dir);
  ~RunDirLock();
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  int fd_ = -1;
};

// Command stages. Each checks the stamps of the stages it depends on and
// throws PrerequisiteError when they are missing or stale.
void stage_prepare(const RunConfig& config, bool force = false);
void stage_embed(const RunConfig& config, bool force = false);
std::filesystem::path stage_run(const RunConfig& config);
std::filesystem::path stage_ablate(const RunConfig& config);
std::filesystem::path stage_export(const RunConfig& config);
std::filesystem::path stage_report(const RunConfig& config);

// Output directory of `run` for this configuration.
std::filesystem::path run_output_dir(const RunConfig& config);

}  // namespace megclass
