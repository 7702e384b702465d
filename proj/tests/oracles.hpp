#pragma once

// Reference computations written with plain loops over std::vector, kept
// independent of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

inline double dot(const Row& a, const Row& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const Row& a, const Row& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// (top class, gap) by sorting all similarities; ties to the lowest index.
inline std::pair<int, double> vote(const Row& s, const Rows& classes) {
  std::vector<std::pair<double, int>> sims;
  for (std::size_t k = 0; k < classes.size(); ++k) sims.push_back({cosine(s, classes[k]), static_cast<int>(k)});
  std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return {sims[0].second, sims[0].first - sims[1].first};
}

// Document distribution from gap-weighted votes with the uniform fallback.
inline Row distribution(const Rows& sentences, const Rows& classes) {
  Row probs(classes.size(), 0.0);
  std::vector<std::pair<int, double>> votes;
  double total = 0.0;
  for (const auto& s : sentences) {
    votes.push_back(vote(s, classes));
    total += votes.back().second;
  }
  for (const auto& [k, g] : votes) {
    probs[static_cast<std::size_t>(k)] += total > 0.0 ? g / total : 1.0 / static_cast<double>(votes.size());
  }
  return probs;
}

// Mean cosine to later sentences, clipped at zero, normalized.
inline Row centrality(const Rows& sentences) {
  const std::size_t n = sentences.size();
  Row c(n, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j + 1 == n) break;
    double s = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) s += cosine(sentences[j], sentences[i]);
    c[j] = std::max(0.0, s / static_cast<double>(n - j - 1));
    total += c[j];
  }
  for (double& x : c) x = total > 0.0 ? x / total : 1.0 / static_cast<double>(n);
  return c;
}

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
// eigenvalues in descending order and the matching eigenvectors as rows.
inline std::pair<Row, Rows> jacobi_eigen(Rows a) {
  const std::size_t n = a.size();
  Rows v(n, Row(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  Row values;
  Rows vectors;
  for (std::size_t i : order) {
    values.push_back(a[i][i]);
    Row col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    vectors.push_back(col);
  }
  return {values, vectors};
}

// Projection of the centered rows onto the top p covariance eigenvectors,
// mapped back to the original space.
inline Rows pca_reconstruct(const Rows& x, std::size_t p) {
  const std::size_t n = x.size();
  const std::size_t h = x.front().size();
  Row mean(h, 0.0);
  for (const auto& r : x)
    for (std::size_t i = 0; i < h; ++i) mean[i] += r[i] / static_cast<double>(n);
  Rows cov(h, Row(h, 0.0));
  for (const auto& r : x)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < h; ++j) cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
  const auto [values, vectors] = jacobi_eigen(cov);
  Rows out;
  for (const auto& r : x) {
    Row c(h);
    for (std::size_t i = 0; i < h; ++i) c[i] = r[i] - mean[i];
    Row rec = mean;
    for (std::size_t q = 0; q < p; ++q) {
      const double coef = dot(c, vectors[q]);
      for (std::size_t i = 0; i < h; ++i) rec[i] += coef * vectors[q][i];
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace oracle

namespace oracle {

struct Net {
  int heads = 1;
  Rows wq, wk, wv, wo, wf, wp;  // h x h, applied as y = x W + b
  Row bq, bk, bv, bo, bf, gain, bias, bp, vp;
};

struct Pooled {
  Rows cs;
  Row alphas;
  Row cd;
};

inline Row affine(const Row& x, const Rows& w, const Row& b) {
  Row y = b;
  for (std::size_t j = 0; j < y.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) y[j] += x[i] * w[i][j];
  return y;
}

inline Row softmax(const Row& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  Row e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - mx));
  for (double& v : e) v /= s;
  return e;
}

// Self-attention with residual, one linear layer, layer norm, then
// tanh attentive pooling, evaluated sentence by sentence.
inline Pooled forward(const Rows& e, const Net& net) {
  const std::size_t n = e.size();
  const std::size_t h = e.front().size();
  const std::size_t dh = h / static_cast<std::size_t>(net.heads);
  Rows q, k, v;
  for (const auto& x : e) {
    q.push_back(affine(x, net.wq, net.bq));
    k.push_back(affine(x, net.wk, net.bk));
    v.push_back(affine(x, net.wv, net.bv));
  }
  Pooled out;
  Row logits;
  for (std::size_t i = 0; i < n; ++i) {
    Row concat(h, 0.0);
    for (int hd = 0; hd < net.heads; ++hd) {
      const std::size_t off = static_cast<std::size_t>(hd) * dh;
      Row scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i][off + c] * k[j][off + c];
        scores[j] = s / std::sqrt(static_cast<double>(dh));
      }
      const Row a = softmax(scores);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < dh; ++c) concat[off + c] += a[j] * v[j][off + c];
    }
    Row x = affine(concat, net.wo, net.bo);
    for (std::size_t c = 0; c < h; ++c) x[c] += e[i][c];
    const Row z = affine(x, net.wf, net.bf);
    double mu = 0.0;
    for (double t : z) mu += t / static_cast<double>(h);
    double var = 0.0;
    for (double t : z) var += (t - mu) * (t - mu) / static_cast<double>(h);
    Row cs(h);
    for (std::size_t c = 0; c < h; ++c) cs[c] = (z[c] - mu) / std::sqrt(var + 1e-5) * net.gain[c] + net.bias[c];
    Row hidden = affine(cs, net.wp, net.bp);
    double lg = 0.0;
    for (std::size_t c = 0; c < h; ++c) lg += std::tanh(hidden[c]) * net.vp[c];
    logits.push_back(lg);
    out.cs.push_back(cs);
  }
  out.alphas = softmax(logits);
  out.cd.assign(h, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < h; ++c) out.cd[c] += out.alphas[i] * out.cs[i][c];
  return out;
}

// -sum_k t_k log softmax(cos(cd, c_k) / tau)
inline double contrastive_loss(const Row& cd, const Rows& classes, const Row& target, double tau) {
  Row z;
  for (const auto& c : classes) z.push_back(cosine(cd, c) / tau);
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  double loss = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) loss -= target[k] * (z[k] - mx - std::log(s));
  return loss;
}

}  // namespace oracle
