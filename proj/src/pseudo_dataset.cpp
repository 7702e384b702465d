#include "megclass/pseudo_dataset.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace megclass {

std::vector<PseudoExample> build_pseudo_dataset(const std::vector<ScoredDoc>& scores,
                                                const std::vector<Document>& docs, double delta, int num_classes) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  std::map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.doc_id, &d);

  std::vector<std::vector<const ScoredDoc*>> pools(static_cast<std::size_t>(num_classes));
  for (const auto& s : scores) {
    if (s.pseudo_label < 0 || s.pseudo_label >= num_classes) throw DataError("pseudo label out of range");
    pools[static_cast<std::size_t>(s.pseudo_label)].push_back(&s);
  }
  std::vector<PseudoExample> out;
  for (int k = 0; k < num_classes; ++k) {
    auto& pool = pools[static_cast<std::size_t>(k)];
    if (pool.empty()) {
      spdlog::warn("class {} has no pseudo-labeled documents; omitted from the pseudo dataset", k);
      continue;
    }
    std::sort(pool.begin(), pool.end(), [](const ScoredDoc* a, const ScoredDoc* b) {
      if (a->confidence != b->confidence) return a->confidence > b->confidence;
      return a->doc_id < b->doc_id;
    });
    const auto take = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(pool.size()) - 1e-9));
    for (std::size_t i = 0; i < std::min(take, pool.size()); ++i) {
      auto it = by_id.find(pool[i]->doc_id);
      if (it == by_id.end()) throw DataError("scored document '" + pool[i]->doc_id + "' is not in the corpus");
      out.push_back({pool[i]->doc_id, it->second->raw_text, k, pool[i]->confidence});
    }
  }
  return out;
}

MeanPooledFeatures::MeanPooledFeatures(const std::vector<Document>& docs, const std::vector<DocTokens>& tokens) {
  if (docs.size() != tokens.size()) throw DataError("token matrices do not align with documents");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Vec sum;
    long rows = 0;
    for (const TokenMatrix& tm : tokens[i]) {
      if (sum.size() == 0) sum = Vec::Zero(tm.vectors.cols());
      sum += tm.vectors.cast<double>().colwise().sum().transpose();
      rows += tm.vectors.rows();
    }
    if (rows == 0) throw DataError("document '" + docs[i].doc_id + "' has no word vectors");
    dim_ = static_cast<int>(sum.size());
    features_.emplace(docs[i].doc_id, sum / static_cast<double>(rows));
  }
}

const Vec& MeanPooledFeatures::at(const std::string& doc_id) const {
  auto it = features_.find(doc_id);
  if (it == features_.end()) throw DataError("no features for document '" + doc_id + "'");
  return it->second;
}

namespace {

class LogisticClassifier : public Classifier {
 public:
  LogisticClassifier(std::shared_ptr<const MeanPooledFeatures> features, Vec mean, Vec scale, Mat weights, Vec bias)
      : features_(std::move(features)),
        mean_(std::move(mean)),
        scale_(std::move(scale)),
        weights_(std::move(weights)),
        bias_(std::move(bias)) {}

  std::vector<int> predict(const std::vector<Document>& docs) const override {
    std::vector<int> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
      const Vec x = (features_->at(d.doc_id) - mean_).cwiseQuotient(scale_);
      const Vec logits = weights_ * x + bias_;
      out.push_back(argmax_lowest({logits.data(), static_cast<std::size_t>(logits.size())}));
    }
    return out;
  }

 private:
  std::shared_ptr<const MeanPooledFeatures> features_;
  Vec mean_, scale_;
  Mat weights_;  // C x h
  Vec bias_;
};

}  // namespace

LogisticRegressionTrainer::LogisticRegressionTrainer(std::shared_ptr<const MeanPooledFeatures> features,
                                                     LogisticConfig config)
    : features_(std::move(features)), config_(config) {}

std::unique_ptr<Classifier> LogisticRegressionTrainer::train(const std::vector<PseudoExample>& examples,
                                                             int num_classes) const {
  if (examples.empty()) throw DataError("cannot train a classifier on an empty pseudo dataset");
  const auto n = static_cast<Eigen::Index>(examples.size());
  const int dim = features_->dim();
  Mat x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = features_->at(examples[static_cast<std::size_t>(i)].doc_id).transpose();
  Vec mean = x.colwise().mean().transpose();
  Vec scale = ((x.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale(j) < 1e-12) scale(j) = 1.0;
  }
  x = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

  Mat onehot = Mat::Zero(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, examples[static_cast<std::size_t>(i)].pseudo_label) = 1.0;

  Mat w = Mat::Zero(num_classes, dim);
  Vec b = Vec::Zero(num_classes);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    Mat logits = (x * w.transpose()).rowwise() + b.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const Mat g_logits = (logits - onehot) / static_cast<double>(n);
    const Mat g_w = g_logits.transpose() * x + config_.l2 * w;
    const Vec g_b = g_logits.colwise().sum().transpose();
    w -= config_.lr * g_w;
    b -= config_.lr * g_b;
  }
  if (!w.allFinite()) throw NumericalError("logistic regression diverged");
  return std::make_unique<LogisticClassifier>(features_, std::move(mean), std::move(scale), std::move(w), std::move(b));
}

std::map<std::string, int> train_and_label(const ClassifierTrainer& trainer,
                                           const std::vector<PseudoExample>& pseudo_set,
                                           const std::vector<Document>& docs, int num_classes) {
  if (pseudo_set.empty()) throw DataError("pseudo dataset is empty");
  const auto classifier = trainer.train(pseudo_set, num_classes);
  const std::vector<int> labels = classifier->predict(docs);
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < docs.size(); ++i) out.emplace(docs[i].doc_id, labels[i]);
  return out;
}

void write_pseudo_dataset(const std::filesystem::path& path, const std::vector<PseudoExample>& examples) {
  std::ostringstream out;
  for (const auto& e : examples) {
    out << nlohmann::json{{"id", e.doc_id}, {"text", e.text}, {"pseudo_label", e.pseudo_label},
                          {"confidence", e.confidence}}
               .dump()
        << '\n';
  }
  write_file_atomic(path, out.str());
}

void write_predictions(const std::filesystem::path& path, const std::vector<Document>& docs,
                       const std::map<std::string, int>& predictions, const std::vector<ClassSpec>& classes) {
  std::ostringstream out;
  for (const auto& d : docs) {
    const int label = predictions.at(d.doc_id);
    out << nlohmann::json{{"id", d.doc_id}, {"label", label},
                          {"label_name", classes.at(static_cast<std::size_t>(label)).surface_name}}
               .dump()
        << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace megclass
