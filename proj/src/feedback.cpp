#include "megclass/feedback.hpp"

#include "megclass/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace megclass {

Vec PcaModel::transform(const Vec& v) const { return components * (v - mean); }

Mat PcaModel::transform_rows(const Mat& rows) const {
  return (rows.rowwise() - mean.transpose()) * components.transpose();
}

PcaModel fit_pca(const Mat& rows, int p) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index h = rows.cols();
  if (p < 1 || p > h || n <= p) {
    throw ConfigError("PCA needs N > p >= 1 and p <= h (N=" + std::to_string(n) + ", h=" + std::to_string(h) +
                      ", p=" + std::to_string(p) + ")");
  }
  PcaModel model;
  model.mean = rows.colwise().mean().transpose();
  const Mat centered = rows.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Mat> svd(centered, Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double tol = std::max<double>(n, h) * 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
  if (sv.size() == 0 || sv(0) == 0.0 || rank < p) {
    throw NumericalError("PCA input has rank " + std::to_string(rank) + " < " + std::to_string(p) +
                         "; choose a smaller number of PCA dimensions");
  }
  model.components = svd.matrixV().leftCols(p).transpose();
  for (Eigen::Index r = 0; r < p; ++r) {
    Eigen::Index arg = 0;
    model.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (model.components(r, arg) < 0.0) model.components.row(r) *= -1.0;
  }
  model.explained_variance = sv.head(p).array().square() / static_cast<double>(n - 1);
  return model;
}

std::vector<ScoredDoc> score_documents(const std::vector<std::string>& doc_ids, const std::vector<Vec>& doc_vectors,
                                       const std::vector<Vec>& class_vecs, const PcaModel* pca) {
  std::vector<Vec> classes;
  for (const Vec& c : class_vecs) classes.push_back(pca ? pca->transform(c) : c);
  std::vector<ScoredDoc> out;
  out.reserve(doc_vectors.size());
  std::vector<double> sims(classes.size());
  for (std::size_t i = 0; i < doc_vectors.size(); ++i) {
    const Vec v = pca ? pca->transform(doc_vectors[i]) : doc_vectors[i];
    for (std::size_t k = 0; k < classes.size(); ++k) sims[k] = cosine_or_zero(v, classes[k]);
    const int best = argmax_lowest(sims);
    out.push_back({doc_ids[i], best, sims[static_cast<std::size_t>(best)]});
  }
  return out;
}

Selection select_top_k(const std::vector<ScoredDoc>& scored, double k_fraction, int num_classes) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw ConfigError("top-k fraction must lie in (0, 1]");
  std::vector<std::vector<const ScoredDoc*>> pools(static_cast<std::size_t>(num_classes));
  for (const auto& s : scored) {
    if (s.pseudo_label < 0 || s.pseudo_label >= num_classes) throw DataError("pseudo label out of range");
    pools[static_cast<std::size_t>(s.pseudo_label)].push_back(&s);
  }
  Selection out;
  for (int k = 0; k < num_classes; ++k) {
    auto& pool = pools[static_cast<std::size_t>(k)];
    auto& chosen = out[k];
    if (pool.empty()) {
      spdlog::warn("class {} has no pseudo-labeled documents; its class set stays at the initial vector", k);
      continue;
    }
    std::stable_sort(pool.begin(), pool.end(), [](const ScoredDoc* a, const ScoredDoc* b) {
      if (a->confidence != b->confidence) return a->confidence > b->confidence;
      return a->doc_id < b->doc_id;
    });
    // Guard against k * count landing a hair above an integer.
    const auto take = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(pool.size()) - 1e-9));
    for (std::size_t i = 0; i < std::min(take, pool.size()); ++i) chosen.push_back(pool[i]->doc_id);
  }
  return out;
}

std::vector<ClassModel> update_class_vectors(const std::vector<ClassModel>& models, const Selection& selections,
                                             const std::map<std::string, Vec>& doc_vectors) {
  std::vector<ClassModel> out = models;
  for (ClassModel& m : out) {
    m.class_set.clear();
    m.class_set.push_back(m.initial_vector);
    auto it = selections.find(m.class_id);
    if (it != selections.end()) {
      for (const std::string& id : it->second) {
        auto v = doc_vectors.find(id);
        if (v == doc_vectors.end()) throw DataError("selected document '" + id + "' has no vector");
        m.class_set.push_back(v->second);
      }
    }
    Vec sum = Vec::Zero(m.initial_vector.size());
    for (const Vec& v : m.class_set) sum += v;
    m.class_vector = sum / static_cast<double>(m.class_set.size());
  }
  return out;
}

FeedbackResult run_iterations(const std::vector<std::string>& doc_ids, const std::vector<Mat>& sentences,
                              const std::vector<ClassModel>& models, const FeedbackConfig& config,
                              const IterationObserver& observer) {
  if (config.iterations < 1) throw ConfigError("at least one feedback iteration is required");
  if (sentences.size() != doc_ids.size() || sentences.empty()) throw DataError("documents and sentences misaligned");
  const int num_classes = static_cast<int>(models.size());
  const auto n_docs = static_cast<int>(sentences.size());
  const int dim = static_cast<int>(sentences.front().cols());

  FeedbackResult result;
  std::vector<Vec> class_vecs = class_vectors(models);
  result.initial_targets.reserve(sentences.size());
  result.initial_votes.resize(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    result.initial_targets.push_back(ensemble_distribution(doc_ids[i], sentences[i], class_vecs, config.weight_mode,
                                                           nullptr, &result.initial_votes[i]));
  }

  // Layer-normalized outputs lie in an (h-1)-dimensional affine subspace.
  const int pca_dims = std::min({config.pca_dims, n_docs - 1, dim - 1});
  if (config.use_pca && pca_dims != config.pca_dims) {
    spdlog::info("PCA dimensions clamped from {} to {}", config.pca_dims, pca_dims);
  }

  std::vector<ClassModel> current = models;
  std::vector<ClassDistribution> targets = result.initial_targets;
  for (int t = 1; t <= config.iterations; ++t) {
    IterationResult it;
    it.iteration = t;
    it.class_vectors = class_vecs;
    if (t > 1) {
      const IterationResult& prev = result.iterations.back();
      targets.clear();
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        targets.push_back(ensemble_distribution(doc_ids[i], prev.docs[i].cs, class_vecs, config.weight_mode,
                                                &prev.docs[i].alphas));
      }
    }
    it.targets = targets;

    AttentionConfig attn = config.attention;
    attn.seed = config.seed + static_cast<std::uint64_t>(t);
    TrainResult trained = train(doc_ids, sentences, targets, class_vecs, attn);
    it.params = std::move(trained.params);
    it.epoch_losses = std::move(trained.epoch_losses);
    it.docs = std::move(trained.docs);

    std::vector<Vec> cds;
    cds.reserve(it.docs.size());
    for (const auto& d : it.docs) cds.push_back(d.cd);
    it.raw_scores = score_documents(doc_ids, cds, class_vecs, nullptr);
    if (config.use_pca) {
      Mat stacked(n_docs, dim);
      for (int i = 0; i < n_docs; ++i) stacked.row(i) = cds[static_cast<std::size_t>(i)].transpose();
      it.pca = fit_pca(stacked, pca_dims);
      it.pca_dims = pca_dims;
      it.scores = score_documents(doc_ids, cds, class_vecs, &it.pca);
    } else {
      it.scores = it.raw_scores;
    }
    it.selection = select_top_k(it.scores, config.k, num_classes);

    std::map<std::string, Vec> by_id;
    for (std::size_t i = 0; i < cds.size(); ++i) by_id.emplace(doc_ids[i], cds[i]);
    current = update_class_vectors(current, it.selection, by_id);
    it.updated_models = current;
    class_vecs = class_vectors(current);

    if (observer) observer(it);
    // Only the latest round's sentence matrices feed the next targets.
    if (!result.iterations.empty()) {
      for (auto& d : result.iterations.back().docs) d.cs.resize(0, 0);
    }
    result.iterations.push_back(std::move(it));
  }
  result.final_models = current;
  return result;
}

}  // namespace megclass
