#include "bssimt/nn.hpp"

#include <cmath>

namespace bssimt::nn {

Mat apply_dropout(const Mat& x, const Dropout& dropout, Mat& mask) {
  if (!dropout.active()) {
    mask.resize(0, 0);
    return x;
  }
  const double keep = 1.0 - dropout.rate;
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = dropout.rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
  return x.cwiseProduct(mask);
}

Mat dropout_backward(const Mat& dy, const Mat& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

void Linear::declare(ParamLayout& layout, int in, int out) {
  weight = layout.add(in, out);
  bias = layout.add(1, out);
}

void Linear::init(Grads params, Rng& rng) const {
  const double bound = std::sqrt(6.0 / (weight.rows + weight.cols));
  auto w = view(params, weight);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  view(params, bias).setZero();
}

Mat linear(const MatRef& x, const Linear& layer, Params p) {
  Mat y = x * view(p, layer.weight);
  y.rowwise() += view(p, layer.bias).row(0);
  return y;
}

Mat linear_backward(const MatRef& x, const Mat& dy, const Linear& layer, Params p, Grads g) {
  view(g, layer.weight).noalias() += x.transpose() * dy;
  view(g, layer.bias).row(0) += dy.colwise().sum();
  return dy * view(p, layer.weight).transpose();
}

void LayerNorm::declare(ParamLayout& layout, int dim) {
  gain = layout.add(1, dim);
  shift = layout.add(1, dim);
}

void LayerNorm::init(Grads params) const {
  view(params, gain).setOnes();
  view(params, shift).setZero();
}

namespace {
constexpr double kNormEps = 1e-5;
}

Mat layer_norm(const MatRef& x, const LayerNorm& layer, Params p, LayerNormCache* cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Mat normalized(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kNormEps);
    normalized.row(r) = centered * inv_std(r);
  }
  Mat y = normalized.array().rowwise() * view(p, layer.gain).row(0).array();
  y.rowwise() += view(p, layer.shift).row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const LayerNorm& layer,
                        Params p, Grads g) {
  const auto& xhat = cache.normalized;
  view(g, layer.gain).row(0) += dy.cwiseProduct(xhat).colwise().sum();
  view(g, layer.shift).row(0) += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * view(p, layer.gain).row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dy.cols());
    dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * cache.inv_std(r);
  }
  return dx;
}

void Attention::declare(ParamLayout& layout, int dim, int num_heads) {
  heads = num_heads;
  query.declare(layout, dim, dim);
  key.declare(layout, dim, dim);
  value.declare(layout, dim, dim);
  output.declare(layout, dim, dim);
}

void Attention::init(Grads params, Rng& rng) const {
  query.init(params, rng);
  key.init(params, rng);
  value.init(params, rng);
  output.init(params, rng);
}

Mat attend(const MatRef& q, const MatRef& k, const MatRef& v, std::span<const int> visible,
           int heads, std::vector<Mat>* probs) {
  const Eigen::Index rows = q.rows(), keys = k.rows();
  const Eigen::Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat context = Mat::Zero(rows, q.cols());
  if (probs) probs->assign(static_cast<std::size_t>(heads), Mat::Zero(rows, keys));
  RowVec scores(keys);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index n = visible[static_cast<std::size_t>(r)];
      auto s = scores.head(n);
      s.noalias() = q.row(r).segment(c0, dh) * k.block(0, c0, n, dh).transpose();
      s *= scale;
      const double mx = s.maxCoeff();
      s = (s.array() - mx).exp();
      s /= s.sum();
      context.row(r).segment(c0, dh).noalias() = s * v.block(0, c0, n, dh);
      if (probs) (*probs)[static_cast<std::size_t>(h)].row(r).head(n) = s;
    }
  }
  return context;
}

Mat attention(const MatRef& xq, const MatRef& xkv, std::span<const int> visible,
              const Attention& layer, Params p, AttentionCache* cache) {
  Mat q = linear(xq, layer.query, p);
  Mat k = linear(xkv, layer.key, p);
  Mat v = linear(xkv, layer.value, p);
  std::vector<Mat> probs;
  Mat context = attend(q, k, v, visible, layer.heads, cache ? &probs : nullptr);
  Mat y = linear(context, layer.output, p);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return y;
}

void attention_backward(const Mat& dy, const MatRef& xq, const MatRef& xkv,
                        std::span<const int> visible, const AttentionCache& cache,
                        const Attention& layer, Params p, Grads g, Mat& dxq, Mat& dxkv) {
  const Mat dcontext = linear_backward(cache.context, dy, layer.output, p, g);
  const Eigen::Index rows = cache.q.rows(), keys = cache.k.rows(), dim = cache.q.cols();
  const Eigen::Index dh = dim / layer.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dq = Mat::Zero(rows, dim), dk = Mat::Zero(keys, dim), dv = Mat::Zero(keys, dim);
  RowVec dprob(keys);
  for (int h = 0; h < layer.heads; ++h) {
    const Eigen::Index c0 = h * dh;
    const Mat& probs = cache.probs[static_cast<std::size_t>(h)];
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index n = visible[static_cast<std::size_t>(r)];
      const auto pr = probs.row(r).head(n);
      const auto dctx = dcontext.row(r).segment(c0, dh);
      dv.block(0, c0, n, dh).noalias() += pr.transpose() * dctx;
      auto dp = dprob.head(n);
      dp.noalias() = dctx * cache.v.block(0, c0, n, dh).transpose();
      const double inner = dp.dot(pr);
      RowVec dscore = (pr.array() * (dp.array() - inner)).matrix() * scale;
      dq.row(r).segment(c0, dh).noalias() += dscore * cache.k.block(0, c0, n, dh);
      dk.block(0, c0, n, dh).noalias() += dscore.transpose() * cache.q.row(r).segment(c0, dh);
    }
  }
  dxq = linear_backward(xq, dq, layer.query, p, g);
  dxkv = linear_backward(xkv, dk, layer.key, p, g);
  dxkv += linear_backward(xkv, dv, layer.value, p, g);
}

void FeedForward::declare(ParamLayout& layout, int dim, int ffn_dim) {
  hidden.declare(layout, dim, ffn_dim);
  output.declare(layout, ffn_dim, dim);
}

void FeedForward::init(Grads params, Rng& rng) const {
  hidden.init(params, rng);
  output.init(params, rng);
}

Mat feed_forward(const MatRef& x, const FeedForward& layer, Params p, FeedForwardCache* cache) {
  Mat pre = linear(x, layer.hidden, p);
  Mat act = pre.cwiseMax(0.0);
  Mat y = linear(act, layer.output, p);
  if (cache) {
    cache->pre_activation = std::move(pre);
    cache->activation = std::move(act);
  }
  return y;
}

Mat feed_forward_backward(const MatRef& x, const Mat& dy, const FeedForwardCache& cache,
                          const FeedForward& layer, Params p, Grads g) {
  Mat dact = linear_backward(cache.activation, dy, layer.output, p, g);
  Mat dpre = (cache.pre_activation.array() > 0.0).select(dact.array(), 0.0).matrix();
  return linear_backward(x, dpre, layer.hidden, p, g);
}

void Block::declare(ParamLayout& layout, int dim, int heads, int ffn_dim) {
  attn_norm.declare(layout, dim);
  attn.declare(layout, dim, heads);
  ffn_norm.declare(layout, dim);
  ffn.declare(layout, dim, ffn_dim);
}

void Block::init(Grads params, Rng& rng) const {
  attn_norm.init(params);
  attn.init(params, rng);
  ffn_norm.init(params);
  ffn.init(params, rng);
}

Mat block_forward(const Mat& h, const Mat* memory, std::span<const int> visible,
                  const Block& block, Params p, const Dropout& dropout, BlockCache* cache) {
  BlockCache local;
  BlockCache& c = cache ? *cache : local;
  c.attn_in = layer_norm(h, block.attn_norm, p, &c.attn_norm);
  const Mat& kv = memory ? *memory : c.attn_in;
  Mat attn_out = attention(c.attn_in, kv, visible, block.attn, p, cache ? &c.attn : nullptr);
  c.mid = h + apply_dropout(attn_out, dropout, c.attn_drop);
  c.ffn_in = layer_norm(c.mid, block.ffn_norm, p, &c.ffn_norm);
  Mat ffn_out = feed_forward(c.ffn_in, block.ffn, p, cache ? &c.ffn : nullptr);
  return c.mid + apply_dropout(ffn_out, dropout, c.ffn_drop);
}

Mat block_backward(const Mat& dout, const Mat* memory, Mat* dmemory, std::span<const int> visible,
                   const Block& block, Params p, Grads g, const BlockCache& c) {
  Mat dmid = dout;
  const Mat dffn_out = dropout_backward(dout, c.ffn_drop);
  const Mat dffn_in = feed_forward_backward(c.ffn_in, dffn_out, c.ffn, block.ffn, p, g);
  dmid += layer_norm_backward(dffn_in, c.ffn_norm, block.ffn_norm, p, g);

  Mat dh = dmid;
  const Mat dattn_out = dropout_backward(dmid, c.attn_drop);
  const Mat& kv = memory ? *memory : c.attn_in;
  Mat dq, dkv;
  attention_backward(dattn_out, c.attn_in, kv, visible, c.attn, block.attn, p, g, dq, dkv);
  if (memory) {
    *dmemory += dkv;
  } else {
    dq += dkv;
  }
  dh += layer_norm_backward(dq, c.attn_norm, block.attn_norm, p, g);
  return dh;
}

RowVec positional_encoding(int pos, int dim) {
  RowVec pe(dim);
  for (int k = 0; k < dim; k += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(k) / dim);
    pe(k) = std::sin(pos * freq);
    if (k + 1 < dim) pe(k + 1) = std::cos(pos * freq);
  }
  return pe;
}

Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

std::vector<int> causal_visibility(int length) {
  std::vector<int> v(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) v[static_cast<std::size_t>(i)] = i + 1;
  return v;
}

}  // namespace bssimt::nn
