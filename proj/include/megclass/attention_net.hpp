#pragma once

#include "megclass/ensemble.hpp"
#include "megclass/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace megclass {

struct AttentionConfig {
  int heads = 2;
  double tau = 0.2;
  double lr = 1e-3;
  int epochs = 4;
  int batch_size = 16;
  std::uint64_t seed = 0;
  // 1 keeps training bit-reproducible; more threads reduce per-thread
  // gradient partials in a fixed order, so results depend on the count.
  int threads = 1;
};

// Multi-head self-attention -> residual -> feed-forward + layer norm ->
// attentive pooling. Row convention: inputs are |d| x h, y = x W + b.
struct NetworkParams {
  int dim = 0;
  int heads = 0;

  Mat wq, wk, wv, wo;
  Vec bq, bk, bv, bo;

  Mat wf;
  Vec bf, ln_gain, ln_bias;

  // l_alpha(cs) = tanh(cs W + b) . v
  Mat wp;
  Vec bp, vp;

  static NetworkParams init(int dim, int heads, std::uint64_t seed);
  static NetworkParams zeros(int dim, int heads);

  // Calls f(name, data, size) for every tensor in a fixed order.
  template <typename Self, typename F>
  static void visit(Self& p, F&& f) {
    f("wq", p.wq.data(), p.wq.size());
    f("wk", p.wk.data(), p.wk.size());
    f("wv", p.wv.data(), p.wv.size());
    f("wo", p.wo.data(), p.wo.size());
    f("bq", p.bq.data(), p.bq.size());
    f("bk", p.bk.data(), p.bk.size());
    f("bv", p.bv.data(), p.bv.size());
    f("bo", p.bo.data(), p.bo.size());
    f("wf", p.wf.data(), p.wf.size());
    f("bf", p.bf.data(), p.bf.size());
    f("ln_gain", p.ln_gain.data(), p.ln_gain.size());
    f("ln_bias", p.ln_bias.data(), p.ln_bias.size());
    f("wp", p.wp.data(), p.wp.size());
    f("bp", p.bp.data(), p.bp.size());
    f("vp", p.vp.data(), p.vp.size());
  }

  std::size_t num_values() const;
  bool all_finite() const;
  void set_zero();
  void add_scaled(const NetworkParams& other, double scale);
};

struct ContextualizedDoc {
  std::string doc_id;
  Mat cs;                     // |d| x h
  std::vector<double> alphas; // softmax attention weights
  Vec cd;                     // sum_j alphas[j] * cs[j]
};

// Intermediate values kept for the backward pass.
struct ForwardCache {
  Mat input, q, k, v;
  std::vector<Mat> attn;  // per head, |d| x |d|
  Mat heads_out, x, z, z_hat;
  Vec inv_std;
  Mat cs, pool_hidden;
  Vec logits, alpha, cd;
};

ForwardCache forward_cached(const Mat& sentences, const NetworkParams& params);
ContextualizedDoc forward(const Mat& sentences, const NetworkParams& params, const std::string& doc_id = {});

struct LossAndGrad {
  double loss = 0.0;
  Vec grad_cd;
};

// -sum_k target_k log softmax_k(cos(cd, c_k) / tau)
double weighted_contrastive_loss(const Vec& cd, const std::vector<Vec>& class_vecs,
                                 const std::vector<double>& target, double tau);
LossAndGrad weighted_contrastive_loss_grad(const Vec& cd, const std::vector<Vec>& class_vecs,
                                           const std::vector<double>& target, double tau);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(cd).
void backward(const ForwardCache& cache, const Vec& grad_cd, const NetworkParams& params, NetworkParams& grads);

// Forward, loss and (optionally) accumulated gradient for one document.
double document_loss(const Mat& sentences, const NetworkParams& params, const std::vector<Vec>& class_vecs,
                     const std::vector<double>& target, double tau, NetworkParams* grads = nullptr);

class AdamOptimizer {
 public:
  AdamOptimizer(const NetworkParams& shape, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(NetworkParams& params, const NetworkParams& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
  NetworkParams m_, v_;
};

struct TrainResult {
  NetworkParams params;
  std::vector<ContextualizedDoc> docs;
  std::vector<double> epoch_losses;  // mean training loss per epoch
};

// Trains from a seeded initialization. Throws NumericalError (naming epoch
// and batch) if the loss becomes non-finite.
TrainResult train(const std::vector<std::string>& doc_ids, const std::vector<Mat>& sentences,
                  const std::vector<ClassDistribution>& targets, const std::vector<Vec>& class_vecs,
                  const AttentionConfig& config);

std::vector<ContextualizedDoc> forward_all(const std::vector<std::string>& doc_ids,
                                           const std::vector<Mat>& sentences, const NetworkParams& params,
                                           int threads = 1);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace megclass
