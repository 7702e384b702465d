#include "megclass/attention_net.hpp"

#include "megclass/binary_io.hpp"
#include "megclass/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace megclass {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr std::string_view kCheckpointMagic = "MEGCKPv1";
constexpr std::uint32_t kCheckpointVersion = 1;

void softmax_rows(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

NetworkParams NetworkParams::zeros(int dim, int heads) {
  NetworkParams p;
  p.dim = dim;
  p.heads = heads;
  for (Mat* m : {&p.wq, &p.wk, &p.wv, &p.wo, &p.wf, &p.wp}) *m = Mat::Zero(dim, dim);
  for (Vec* v : {&p.bq, &p.bk, &p.bv, &p.bo, &p.bf, &p.ln_gain, &p.ln_bias, &p.bp, &p.vp}) *v = Vec::Zero(dim);
  return p;
}

NetworkParams NetworkParams::init(int dim, int heads, std::uint64_t seed) {
  if (dim <= 0 || heads <= 0 || dim % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " must divide hidden size " + std::to_string(dim));
  }
  NetworkParams p = zeros(dim, heads);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (Mat* m : {&p.wq, &p.wk, &p.wv, &p.wo, &p.wf, &p.wp}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = uni(rng);
  }
  p.ln_gain.setOnes();
  std::normal_distribution<double> small(0.0, 0.02);
  for (Eigen::Index i = 0; i < p.vp.size(); ++i) p.vp(i) = small(rng);
  return p;
}

std::size_t NetworkParams::num_values() const {
  std::size_t n = 0;
  visit(*this, [&](const char*, const double*, Eigen::Index size) { n += static_cast<std::size_t>(size); });
  return n;
}

bool NetworkParams::all_finite() const {
  bool ok = true;
  visit(*this, [&](const char*, const double* data, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) ok = ok && std::isfinite(data[i]);
  });
  return ok;
}

void NetworkParams::set_zero() {
  visit(*this, [](const char*, double* data, Eigen::Index size) { std::fill(data, data + size, 0.0); });
}

void NetworkParams::add_scaled(const NetworkParams& other, double scale) {
  std::vector<const double*> src;
  visit(other, [&](const char*, const double* data, Eigen::Index) { src.push_back(data); });
  std::size_t t = 0;
  visit(*this, [&](const char*, double* data, Eigen::Index size) {
    const double* s = src[t++];
    for (Eigen::Index i = 0; i < size; ++i) data[i] += scale * s[i];
  });
}

ForwardCache forward_cached(const Mat& sentences, const NetworkParams& p) {
  if (sentences.rows() < 1) throw DataError("a document needs at least one sentence");
  if (sentences.cols() != p.dim) {
    throw DataError("sentence width " + std::to_string(sentences.cols()) + " does not match network size " +
                    std::to_string(p.dim));
  }
  const Eigen::Index n = sentences.rows();
  const int d_head = p.dim / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  ForwardCache c;
  c.input = sentences;
  c.q = (sentences * p.wq).rowwise() + p.bq.transpose();
  c.k = (sentences * p.wk).rowwise() + p.bk.transpose();
  c.v = (sentences * p.wv).rowwise() + p.bv.transpose();
  c.heads_out.resize(n, p.dim);
  c.attn.resize(static_cast<std::size_t>(p.heads));
  for (int hd = 0; hd < p.heads; ++hd) {
    const auto qh = c.q.middleCols(hd * d_head, d_head);
    const auto kh = c.k.middleCols(hd * d_head, d_head);
    Mat a = scale * (qh * kh.transpose());
    softmax_rows(a);
    c.heads_out.middleCols(hd * d_head, d_head) = a * c.v.middleCols(hd * d_head, d_head);
    c.attn[static_cast<std::size_t>(hd)] = std::move(a);
  }
  c.x = ((c.heads_out * p.wo).rowwise() + p.bo.transpose()) + sentences;
  c.z = (c.x * p.wf).rowwise() + p.bf.transpose();

  c.z_hat.resize(n, p.dim);
  c.inv_std.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = c.z.row(r).mean();
    const double var = (c.z.row(r).array() - mu).square().mean();
    c.inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    c.z_hat.row(r) = (c.z.row(r).array() - mu) * c.inv_std(r);
  }
  c.cs = (c.z_hat.array().rowwise() * p.ln_gain.transpose().array()).matrix().rowwise() + p.ln_bias.transpose();

  c.pool_hidden = ((c.cs * p.wp).rowwise() + p.bp.transpose()).array().tanh().matrix();
  c.logits = c.pool_hidden * p.vp;
  c.alpha = softmax(c.logits);
  c.cd = c.cs.transpose() * c.alpha;
  return c;
}

ContextualizedDoc forward(const Mat& sentences, const NetworkParams& params, const std::string& doc_id) {
  ForwardCache c = forward_cached(sentences, params);
  ContextualizedDoc out;
  out.doc_id = doc_id;
  out.cs = std::move(c.cs);
  out.alphas.assign(c.alpha.data(), c.alpha.data() + c.alpha.size());
  out.cd = std::move(c.cd);
  return out;
}

LossAndGrad weighted_contrastive_loss_grad(const Vec& cd, const std::vector<Vec>& class_vecs,
                                           const std::vector<double>& target, double tau) {
  if (tau <= 0.0) throw ConfigError("temperature tau must be positive");
  if (target.size() != class_vecs.size()) throw DataError("target distribution size does not match class count");
  const double cd_norm = cd.norm();
  if (cd_norm == 0.0) throw NumericalError("document vector has zero norm");
  const auto n_classes = static_cast<Eigen::Index>(class_vecs.size());

  Vec cos(n_classes);
  std::vector<Vec> unit(class_vecs.size());
  for (Eigen::Index k = 0; k < n_classes; ++k) {
    const Vec& ck = class_vecs[static_cast<std::size_t>(k)];
    const double nk = ck.norm();
    if (nk == 0.0) throw NumericalError("class vector " + std::to_string(k) + " has zero norm");
    unit[static_cast<std::size_t>(k)] = ck / nk;
    cos(k) = unit[static_cast<std::size_t>(k)].dot(cd) / cd_norm;
  }
  const Vec logits = cos / tau;
  const double mx = logits.maxCoeff();
  const double log_z = mx + std::log((logits.array() - mx).exp().sum());
  const Vec probs = (logits.array() - log_z).exp();

  LossAndGrad out;
  double target_mass = 0.0;
  for (Eigen::Index k = 0; k < n_classes; ++k) {
    const double t = target[static_cast<std::size_t>(k)];
    out.loss -= t * (logits(k) - log_z);
    target_mass += t;
  }
  out.grad_cd = Vec::Zero(cd.size());
  for (Eigen::Index k = 0; k < n_classes; ++k) {
    const double g_cos = (probs(k) * target_mass - target[static_cast<std::size_t>(k)]) / tau;
    out.grad_cd += g_cos * (unit[static_cast<std::size_t>(k)] / cd_norm - cos(k) * cd / (cd_norm * cd_norm));
  }
  return out;
}

double weighted_contrastive_loss(const Vec& cd, const std::vector<Vec>& class_vecs,
                                 const std::vector<double>& target, double tau) {
  return weighted_contrastive_loss_grad(cd, class_vecs, target, tau).loss;
}

void backward(const ForwardCache& c, const Vec& grad_cd, const NetworkParams& p, NetworkParams& g) {
  const int d_head = p.dim / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  // Attentive pooling.
  const Vec g_alpha = c.cs * grad_cd;
  Mat g_cs = c.alpha * grad_cd.transpose();
  const Vec g_logits = c.alpha.cwiseProduct((g_alpha.array() - c.alpha.dot(g_alpha)).matrix());
  g.vp += c.pool_hidden.transpose() * g_logits;
  const Mat g_pre = (g_logits * p.vp.transpose()).cwiseProduct(
      (1.0 - c.pool_hidden.array().square()).matrix());
  g.wp += c.cs.transpose() * g_pre;
  g.bp += g_pre.colwise().sum().transpose();
  g_cs += g_pre * p.wp.transpose();

  // Layer norm.
  g.ln_gain += g_cs.cwiseProduct(c.z_hat).colwise().sum().transpose();
  g.ln_bias += g_cs.colwise().sum().transpose();
  const Mat g_zhat = (g_cs.array().rowwise() * p.ln_gain.transpose().array()).matrix();
  Mat g_z(g_zhat.rows(), g_zhat.cols());
  for (Eigen::Index r = 0; r < g_z.rows(); ++r) {
    const double mean_g = g_zhat.row(r).mean();
    const double mean_gz = g_zhat.row(r).cwiseProduct(c.z_hat.row(r)).mean();
    g_z.row(r) = c.inv_std(r) * (g_zhat.row(r).array() - mean_g - c.z_hat.row(r).array() * mean_gz).matrix();
  }

  // Feed-forward.
  g.wf += c.x.transpose() * g_z;
  g.bf += g_z.colwise().sum().transpose();
  const Mat g_x = g_z * p.wf.transpose();

  // Output projection; the residual path does not reach any parameter.
  g.wo += c.heads_out.transpose() * g_x;
  g.bo += g_x.colwise().sum().transpose();
  const Mat g_heads = g_x * p.wo.transpose();

  Mat g_q(c.q.rows(), c.q.cols());
  Mat g_k(c.k.rows(), c.k.cols());
  Mat g_v(c.v.rows(), c.v.cols());
  for (int hd = 0; hd < p.heads; ++hd) {
    const Mat& a = c.attn[static_cast<std::size_t>(hd)];
    const auto g_oh = g_heads.middleCols(hd * d_head, d_head);
    const Mat g_a = g_oh * c.v.middleCols(hd * d_head, d_head).transpose();
    g_v.middleCols(hd * d_head, d_head) = a.transpose() * g_oh;
    const Vec row_dot = g_a.cwiseProduct(a).rowwise().sum();
    const Mat g_s = a.cwiseProduct((g_a.colwise() - row_dot));
    g_q.middleCols(hd * d_head, d_head) = scale * (g_s * c.k.middleCols(hd * d_head, d_head));
    g_k.middleCols(hd * d_head, d_head) = scale * (g_s.transpose() * c.q.middleCols(hd * d_head, d_head));
  }
  g.wq += c.input.transpose() * g_q;
  g.bq += g_q.colwise().sum().transpose();
  g.wk += c.input.transpose() * g_k;
  g.bk += g_k.colwise().sum().transpose();
  g.wv += c.input.transpose() * g_v;
  g.bv += g_v.colwise().sum().transpose();
}

double document_loss(const Mat& sentences, const NetworkParams& params, const std::vector<Vec>& class_vecs,
                     const std::vector<double>& target, double tau, NetworkParams* grads) {
  const ForwardCache cache = forward_cached(sentences, params);
  const LossAndGrad lg = weighted_contrastive_loss_grad(cache.cd, class_vecs, target, tau);
  if (grads) backward(cache, lg.grad_cd, params, *grads);
  return lg.loss;
}

AdamOptimizer::AdamOptimizer(const NetworkParams& shape, double lr, double beta1, double beta2, double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(NetworkParams::zeros(shape.dim, shape.heads)),
      v_(NetworkParams::zeros(shape.dim, shape.heads)) {}

void AdamOptimizer::step(NetworkParams& params, const NetworkParams& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  std::vector<const double*> g_ptrs;
  std::vector<double*> m_ptrs;
  std::vector<double*> v_ptrs;
  NetworkParams::visit(grads, [&](const char*, const double* d, Eigen::Index) { g_ptrs.push_back(d); });
  NetworkParams::visit(m_, [&](const char*, double* d, Eigen::Index) { m_ptrs.push_back(d); });
  NetworkParams::visit(v_, [&](const char*, double* d, Eigen::Index) { v_ptrs.push_back(d); });
  std::size_t t = 0;
  NetworkParams::visit(params, [&](const char*, double* w, Eigen::Index size) {
    const double* g = g_ptrs[t];
    double* m = m_ptrs[t];
    double* v = v_ptrs[t];
    ++t;
    for (Eigen::Index i = 0; i < size; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  });
}

TrainResult train(const std::vector<std::string>& doc_ids, const std::vector<Mat>& sentences,
                  const std::vector<ClassDistribution>& targets, const std::vector<Vec>& class_vecs,
                  const AttentionConfig& config) {
  if (sentences.empty()) throw DataError("no documents to train on");
  if (targets.size() != sentences.size() || doc_ids.size() != sentences.size()) {
    throw DataError("one target distribution per document is required");
  }
  if (config.epochs < 0 || config.batch_size < 1) throw ConfigError("epochs >= 0 and batch_size >= 1 required");
  const int dim = static_cast<int>(sentences.front().cols());

  TrainResult result{NetworkParams::init(dim, config.heads, config.seed), {}, {}};
  AdamOptimizer adam(result.params, config.lr);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  const int workers = std::max(1, config.threads);
  std::vector<NetworkParams> partial(static_cast<std::size_t>(workers), NetworkParams::zeros(dim, config.heads));
  NetworkParams grads = NetworkParams::zeros(dim, config.heads);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::size_t count = end - start;
      std::vector<double> losses(count, 0.0);
      for (auto& pg : partial) pg.set_zero();
      parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
        for (std::size_t b = w; b < count; b += static_cast<std::size_t>(workers)) {
          const std::size_t doc = order[start + b];
          losses[b] = document_loss(sentences[doc], result.params, class_vecs, targets[doc].probs, config.tau,
                                    &partial[w]);
        }
      });
      const double batch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
      epoch_loss += batch_loss;
      grads.set_zero();
      for (const auto& pg : partial) grads.add_scaled(pg, 1.0 / static_cast<double>(count));
      adam.step(result.params, grads);
      if (!result.params.all_finite()) {
        throw NumericalError("non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    spdlog::debug("epoch {} mean loss {:.6f}", epoch, result.epoch_losses.back());
  }
  result.docs = forward_all(doc_ids, sentences, result.params, config.threads);
  return result;
}

std::vector<ContextualizedDoc> forward_all(const std::vector<std::string>& doc_ids,
                                           const std::vector<Mat>& sentences, const NetworkParams& params,
                                           int threads) {
  std::vector<ContextualizedDoc> out(sentences.size());
  parallel_for(sentences.size(), threads, [&](std::size_t i) { out[i] = forward(sentences[i], params, doc_ids[i]); });
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params) {
  BinaryWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.dim));
  w.u32(static_cast<std::uint32_t>(params.heads));
  NetworkParams::visit(params, [&](const char* name, const double* data, Eigen::Index size) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(size));
    w.f64_span({data, static_cast<std::size_t>(size)});
  });
  write_file_atomic(path, w.buffer());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), path.string());
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw CacheError(path.string() + ": not a checkpoint");
  if (r.u32() != kCheckpointVersion) throw CacheError(path.string() + ": unsupported checkpoint version");
  const int dim = static_cast<int>(r.u32());
  const int heads = static_cast<int>(r.u32());
  NetworkParams p = NetworkParams::zeros(dim, heads);
  NetworkParams::visit(p, [&](const char* name, double* data, Eigen::Index size) {
    if (r.str() != name || r.u64() != static_cast<std::uint64_t>(size)) {
      throw CacheError(path.string() + ": tensor layout mismatch at " + name);
    }
    r.f64_span({data, static_cast<std::size_t>(size)});
  });
  if (!r.at_end()) throw CacheError(path.string() + ": trailing bytes in checkpoint");
  return p;
}

}  // namespace megclass
