#pragma once

// Dense layers with hand-written backward passes. Parameters live in one flat
// buffer addressed through ParamRef offsets, so optimizers and checkpoints
// treat a model as a single vector.

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "bssimt/rng.hpp"

namespace bssimt::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatRef = Eigen::Ref<const Mat>;

/// Eigen picks a summation order from the address alignment of mapped data,
/// so storage it maps is allocated on its vector boundary to keep results
/// independent of where the allocator places a buffer.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

using Params = std::span<const double>;
using Grads = std::span<double>;

struct ParamRef {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

class ParamLayout {
 public:
  ParamRef add(int rows, int cols) {
    ParamRef r{size_, rows, cols};
    size_ += r.size();
    return r;
  }
  std::size_t size() const { return size_; }

 private:
  std::size_t size_ = 0;
};

inline ConstMatMap view(Params p, const ParamRef& r) {
  return ConstMatMap(p.data() + r.offset, r.rows, r.cols);
}
inline MatMap view(Grads g, const ParamRef& r) {
  return MatMap(g.data() + r.offset, r.rows, r.cols);
}

/// Inverted dropout. A null rng or zero rate disables it and leaves `mask`
/// empty.
struct Dropout {
  Rng* rng = nullptr;
  double rate = 0.0;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

/// Returns x * mask and stores the mask (empty when inactive).
Mat apply_dropout(const Mat& x, const Dropout& dropout, Mat& mask);
Mat dropout_backward(const Mat& dy, const Mat& mask);

struct Linear {
  ParamRef weight;  // in x out
  ParamRef bias;    // 1 x out

  void declare(ParamLayout& layout, int in, int out);
  void init(Grads params, Rng& rng) const;
};

Mat linear(const MatRef& x, const Linear& layer, Params p);
/// Accumulates weight/bias gradients and returns dL/dx.
Mat linear_backward(const MatRef& x, const Mat& dy, const Linear& layer, Params p, Grads g);

struct LayerNorm {
  ParamRef gain;
  ParamRef shift;

  void declare(ParamLayout& layout, int dim);
  void init(Grads params) const;
};

struct LayerNormCache {
  Mat normalized;
  Eigen::VectorXd inv_std;
};

Mat layer_norm(const MatRef& x, const LayerNorm& layer, Params p, LayerNormCache* cache);
Mat layer_norm_backward(const Mat& dy, const LayerNormCache& cache, const LayerNorm& layer,
                        Params p, Grads g);

struct Attention {
  Linear query, key, value, output;
  int heads = 1;

  void declare(ParamLayout& layout, int dim, int heads);
  void init(Grads params, Rng& rng) const;
};

/// Query row r attends to key rows [0, visible[r]).
Mat attend(const MatRef& q, const MatRef& k, const MatRef& v, std::span<const int> visible,
           int heads, std::vector<Mat>* probs);

struct AttentionCache {
  Mat q, k, v;
  std::vector<Mat> probs;  // per head, rows x keys
  Mat context;
};

Mat attention(const MatRef& xq, const MatRef& xkv, std::span<const int> visible,
              const Attention& layer, Params p, AttentionCache* cache);
void attention_backward(const Mat& dy, const MatRef& xq, const MatRef& xkv,
                        std::span<const int> visible, const AttentionCache& cache,
                        const Attention& layer, Params p, Grads g, Mat& dxq, Mat& dxkv);

struct FeedForward {
  Linear hidden, output;

  void declare(ParamLayout& layout, int dim, int ffn_dim);
  void init(Grads params, Rng& rng) const;
};

struct FeedForwardCache {
  Mat pre_activation;
  Mat activation;
};

Mat feed_forward(const MatRef& x, const FeedForward& layer, Params p, FeedForwardCache* cache);
Mat feed_forward_backward(const MatRef& x, const Mat& dy, const FeedForwardCache& cache,
                          const FeedForward& layer, Params p, Grads g);

/// Pre-norm residual block: h + Attn(LN(h), memory), then + FFN(LN(.)).
/// Self-attention when memory is null, cross-attention otherwise.
struct Block {
  LayerNorm attn_norm;
  Attention attn;
  LayerNorm ffn_norm;
  FeedForward ffn;

  void declare(ParamLayout& layout, int dim, int heads, int ffn_dim);
  void init(Grads params, Rng& rng) const;
};

struct BlockCache {
  LayerNormCache attn_norm;
  Mat attn_in;
  AttentionCache attn;
  Mat attn_drop;
  Mat mid;
  LayerNormCache ffn_norm;
  Mat ffn_in;
  FeedForwardCache ffn;
  Mat ffn_drop;
};

Mat block_forward(const Mat& h, const Mat* memory, std::span<const int> visible,
                  const Block& block, Params p, const Dropout& dropout, BlockCache* cache);
/// Returns dL/dh; cross-attention blocks add their memory gradient into dmemory.
Mat block_backward(const Mat& dout, const Mat* memory, Mat* dmemory, std::span<const int> visible,
                   const Block& block, Params p, Grads g, const BlockCache& cache);

/// Sinusoidal position code for 0-based position `pos`.
RowVec positional_encoding(int pos, int dim);

/// Row-wise log-softmax.
Mat log_softmax(const Mat& logits);

std::vector<int> causal_visibility(int length);

}  // namespace bssimt::nn
