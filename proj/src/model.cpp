#include "bssimt/model.hpp"

#include <array>
#include <cmath>
#include <map>

#include "binary_io.hpp"
#include "bssimt/error.hpp"

namespace bssimt {

using nn::Mat;
using nn::RowVec;

namespace {

constexpr std::string_view kScorerMagic = "BSSIMTSC";
constexpr std::uint32_t kScorerVersion = 1;

}  // namespace

void ModelConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1) usage_error("layer counts must be positive");
  if (heads < 1 || embed_dim < 1 || ffn_dim < 1) usage_error("model dimensions must be positive");
  if (embed_dim % heads != 0) usage_error("embed_dim must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) usage_error("dropout must lie in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    usage_error("label_smoothing must lie in [0, 1)");
  }
}

void RowBuffer::append(const RowVec& row) {
  if (row.size() != cols_) usage_error("row width mismatch");
  data_.insert(data_.end(), row.data(), row.data() + row.size());
}

int SourceMemory::visible_rows(int read_count) const {
  if (read_count < 1 || read_count > tokens) {
    usage_error("read_count " + std::to_string(read_count) + " outside [1, " +
                std::to_string(tokens) + "]");
  }
  return closed && read_count == tokens ? tokens + 1 : read_count;
}

TokenId argmax_token(std::span<const double> values) {
  TokenId best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
  }
  return best;
}

TokenId argmax_token(const RowVec& values) {
  return argmax_token(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

Scorer::Scorer(ModelConfig config, Vocabulary source_vocab, Vocabulary target_vocab)
    : config_(config), source_vocab_(std::move(source_vocab)), target_vocab_(std::move(target_vocab)) {
  config_.source_vocab_size = static_cast<int>(source_vocab_.size());
  config_.target_vocab_size = static_cast<int>(target_vocab_.size());
  config_.validate();
  build_layout();
}

Scorer::Scorer(ModelConfig config, Vocabulary source_vocab, Vocabulary target_vocab,
               std::uint64_t seed)
    : Scorer(config, std::move(source_vocab), std::move(target_vocab)) {
  Rng rng = Rng::substream(seed, "scorer-init");
  nn::Grads p = params_;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(config_.embed_dim));
  for (const auto* ref : {&layout_.source_embedding, &layout_.target_embedding}) {
    auto m = nn::view(p, *ref);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, emb_std);
  }
  for (const auto& b : layout_.encoder) b.init(p, rng);
  layout_.encoder_norm.init(p);
  for (const auto& b : layout_.target_stack) b.init(p, rng);
  for (const auto& b : layout_.cross_stack) b.init(p, rng);
  layout_.decoder_norm.init(p);
  layout_.output.init(p, rng);
}

void Scorer::build_layout() {
  const int d = config_.embed_dim;
  nn::ParamLayout lay;
  layout_.source_embedding = lay.add(config_.source_vocab_size, d);
  layout_.target_embedding = lay.add(config_.target_vocab_size, d);
  layout_.encoder.assign(static_cast<std::size_t>(config_.encoder_layers), {});
  for (auto& b : layout_.encoder) b.declare(lay, d, config_.heads, config_.ffn_dim);
  layout_.encoder_norm.declare(lay, d);
  layout_.target_stack.assign(static_cast<std::size_t>(config_.decoder_layers), {});
  for (auto& b : layout_.target_stack) b.declare(lay, d, config_.heads, config_.ffn_dim);
  layout_.cross_stack.assign(static_cast<std::size_t>(config_.decoder_layers), {});
  for (auto& b : layout_.cross_stack) b.declare(lay, d, config_.heads, config_.ffn_dim);
  layout_.decoder_norm.declare(lay, d);
  layout_.output.declare(lay, d, config_.target_vocab_size);
  params_.assign(lay.size(), 0.0);
}

Mat Scorer::embed(const TokenSeq& tokens, Side side, int first_position) const {
  const auto& ref = side == Side::Source ? layout_.source_embedding : layout_.target_embedding;
  const auto table = nn::view(nn::Params(params_), ref);
  const double scale = std::sqrt(static_cast<double>(config_.embed_dim));
  Mat out(static_cast<Eigen::Index>(tokens.size()), config_.embed_dim);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const TokenId t = tokens[r];
    if (t < 0 || t >= ref.rows) usage_error("token id " + std::to_string(t) + " out of range");
    out.row(static_cast<Eigen::Index>(r)) =
        table.row(t) * scale +
        nn::positional_encoding(first_position + static_cast<int>(r), config_.embed_dim);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batched training graph

struct Scorer::Graph {
  TokenSeq source_in, target_in, target_out;
  Mat source_embedded, source_mask;
  std::vector<nn::BlockCache> encoder;
  std::vector<int> encoder_visible;
  nn::LayerNormCache encoder_norm;
  Mat encoder_pre, memory;
  Mat target_embedded, target_mask;
  std::vector<nn::BlockCache> target_stack, cross_stack;
  std::vector<int> target_visible, cross_visible;
  std::vector<Mat> cross_inputs;
  nn::LayerNormCache decoder_norm;
  Mat decoder_pre, decoder_out;
};

Mat Scorer::forward(const SentencePair& pair, const Policy& policy, Rng* dropout_rng,
                    Graph& g) const {
  const int J = pair.source_length(), I = pair.target_length();
  if (J < 1 || I < 1) usage_error("sentence pair sides must be non-empty");
  if (policy.length() != I) {
    usage_error("policy length " + std::to_string(policy.length()) + " != target length " +
                std::to_string(I));
  }
  for (int r : policy.reads) {
    if (r < 1 || r > J) usage_error("policy read count outside [1, J]");
  }
  const nn::Params p = params_;
  const nn::Dropout drop{dropout_rng, config_.dropout};

  g.source_in = pair.source;
  g.source_in.push_back(Vocabulary::kEos);
  g.source_embedded = embed(g.source_in, Side::Source);
  Mat h = nn::apply_dropout(g.source_embedded, drop, g.source_mask);
  g.encoder_visible = nn::causal_visibility(J + 1);
  g.encoder.assign(layout_.encoder.size(), {});
  for (std::size_t l = 0; l < layout_.encoder.size(); ++l) {
    h = nn::block_forward(h, nullptr, g.encoder_visible, layout_.encoder[l], p, drop, &g.encoder[l]);
  }
  g.encoder_pre = std::move(h);
  g.memory = nn::layer_norm(g.encoder_pre, layout_.encoder_norm, p, &g.encoder_norm);

  g.target_in.assign(1, Vocabulary::kBos);
  g.target_in.insert(g.target_in.end(), pair.target.begin(), pair.target.end());
  g.target_out = pair.target;
  g.target_out.push_back(Vocabulary::kEos);
  g.target_embedded = embed(g.target_in, Side::Target);
  h = nn::apply_dropout(g.target_embedded, drop, g.target_mask);
  g.target_visible = nn::causal_visibility(I + 1);
  g.target_stack.assign(layout_.target_stack.size(), {});
  for (std::size_t l = 0; l < layout_.target_stack.size(); ++l) {
    h = nn::block_forward(h, nullptr, g.target_visible, layout_.target_stack[l], p, drop,
                          &g.target_stack[l]);
  }
  g.cross_visible.resize(static_cast<std::size_t>(I + 1));
  for (int r = 0; r <= I; ++r) {
    const int reads = r < I ? policy.reads[static_cast<std::size_t>(r)] : J;
    g.cross_visible[static_cast<std::size_t>(r)] = reads == J ? J + 1 : reads;
  }
  g.cross_stack.assign(layout_.cross_stack.size(), {});
  g.cross_inputs.clear();
  for (std::size_t l = 0; l < layout_.cross_stack.size(); ++l) {
    g.cross_inputs.push_back(h);
    h = nn::block_forward(h, &g.memory, g.cross_visible, layout_.cross_stack[l], p, drop,
                          &g.cross_stack[l]);
  }
  g.decoder_pre = std::move(h);
  g.decoder_out = nn::layer_norm(g.decoder_pre, layout_.decoder_norm, p, &g.decoder_norm);
  return nn::log_softmax(nn::linear(g.decoder_out, layout_.output, p));
}

Scorer::LossResult Scorer::accumulate_gradient(const SentencePair& pair, const Policy& policy,
                                               double weight, nn::Grads grad, Rng* dropout_rng,
                                               double label_smoothing) const {
  Graph g;
  const Mat logp = forward(pair, policy, dropout_rng, g);
  const Eigen::Index rows = logp.rows(), vocab = logp.cols();
  const double eps = label_smoothing;
  LossResult result;
  result.tokens = static_cast<int>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const TokenId y = g.target_out[static_cast<std::size_t>(r)];
    result.loss -= (1.0 - eps) * logp(r, y) + eps / static_cast<double>(vocab) * logp.row(r).sum();
  }
  if (grad.empty()) return result;
  if (grad.size() != params_.size()) usage_error("gradient buffer size mismatch");

  const nn::Params p = params_;
  Mat dlogits = logp.array().exp();
  dlogits.array() -= eps / static_cast<double>(vocab);
  for (Eigen::Index r = 0; r < rows; ++r) {
    dlogits(r, g.target_out[static_cast<std::size_t>(r)]) -= 1.0 - eps;
  }
  dlogits *= weight;

  Mat dh = nn::linear_backward(g.decoder_out, dlogits, layout_.output, p, grad);
  dh = nn::layer_norm_backward(dh, g.decoder_norm, layout_.decoder_norm, p, grad);
  Mat dmemory = Mat::Zero(g.memory.rows(), g.memory.cols());
  for (std::size_t l = layout_.cross_stack.size(); l-- > 0;) {
    dh = nn::block_backward(dh, &g.memory, &dmemory, g.cross_visible, layout_.cross_stack[l], p,
                            grad, g.cross_stack[l]);
  }
  for (std::size_t l = layout_.target_stack.size(); l-- > 0;) {
    dh = nn::block_backward(dh, nullptr, nullptr, g.target_visible, layout_.target_stack[l], p,
                            grad, g.target_stack[l]);
  }
  const double scale = std::sqrt(static_cast<double>(config_.embed_dim));
  {
    const Mat demb = nn::dropout_backward(dh, g.target_mask);
    auto table = nn::view(grad, layout_.target_embedding);
    for (std::size_t r = 0; r < g.target_in.size(); ++r) {
      table.row(g.target_in[r]) += demb.row(static_cast<Eigen::Index>(r)) * scale;
    }
  }
  Mat de = nn::layer_norm_backward(dmemory, g.encoder_norm, layout_.encoder_norm, p, grad);
  for (std::size_t l = layout_.encoder.size(); l-- > 0;) {
    de = nn::block_backward(de, nullptr, nullptr, g.encoder_visible, layout_.encoder[l], p, grad,
                            g.encoder[l]);
  }
  {
    const Mat demb = nn::dropout_backward(de, g.source_mask);
    auto table = nn::view(grad, layout_.source_embedding);
    for (std::size_t r = 0; r < g.source_in.size(); ++r) {
      table.row(g.source_in[r]) += demb.row(static_cast<Eigen::Index>(r)) * scale;
    }
  }
  return result;
}

Mat Scorer::teacher_forced_log_probs(const SentencePair& pair, const Policy& policy) const {
  Graph g;
  return forward(pair, policy, nullptr, g);
}

// ---------------------------------------------------------------------------
// Incremental inference

SourceMemory Scorer::start_source() const {
  SourceMemory m;
  const int d = config_.embed_dim;
  m.keys.assign(layout_.encoder.size(), RowBuffer(d));
  m.values.assign(layout_.encoder.size(), RowBuffer(d));
  m.cross_keys.assign(layout_.cross_stack.size(), RowBuffer(d));
  m.cross_values.assign(layout_.cross_stack.size(), RowBuffer(d));
  return m;
}

namespace {

// One causal self-attention block applied to the newest row; earlier rows are
// represented by their cached keys and values.
Mat incremental_block(const Mat& h, const nn::Block& block, nn::Params p, RowBuffer& keys,
                      RowBuffer& values) {
  const Mat a = nn::layer_norm(h, block.attn_norm, p, nullptr);
  const Mat q = nn::linear(a, block.attn.query, p);
  keys.append(nn::linear(a, block.attn.key, p).row(0));
  values.append(nn::linear(a, block.attn.value, p).row(0));
  const std::array<int, 1> visible{keys.rows()};
  const Mat ctx = nn::attend(q, keys.all(), values.all(), visible, block.attn.heads, nullptr);
  Mat mid = h + nn::linear(ctx, block.attn.output, p);
  const Mat b = nn::layer_norm(mid, block.ffn_norm, p, nullptr);
  return mid + nn::feed_forward(b, block.ffn, p, nullptr);
}

}  // namespace

void Scorer::append_encoder_row(SourceMemory& m, TokenId token) const {
  const nn::Params p = params_;
  const int position = m.tokens;
  Mat h = embed(TokenSeq{token}, Side::Source, position);
  for (std::size_t l = 0; l < layout_.encoder.size(); ++l) {
    h = incremental_block(h, layout_.encoder[l], p, m.keys[l], m.values[l]);
  }
  const Mat memory = nn::layer_norm(h, layout_.encoder_norm, p, nullptr);
  for (std::size_t l = 0; l < layout_.cross_stack.size(); ++l) {
    const auto& attn = layout_.cross_stack[l].attn;
    m.cross_keys[l].append(nn::linear(memory, attn.key, p).row(0));
    m.cross_values[l].append(nn::linear(memory, attn.value, p).row(0));
  }
}

void Scorer::append_source(SourceMemory& m, TokenId token) const {
  if (m.closed) usage_error("source stream already closed");
  if (token < 0 || token >= config_.source_vocab_size) usage_error("source token out of range");
  append_encoder_row(m, token);
  ++m.tokens;
}

void Scorer::close_source(SourceMemory& m) const {
  if (m.closed) return;
  if (m.tokens < 1) usage_error("cannot close an empty source stream");
  append_encoder_row(m, Vocabulary::kEos);
  m.closed = true;
}

SourceMemory Scorer::encode_source(const TokenSeq& source) const {
  SourceMemory m = start_source();
  for (TokenId t : source) append_source(m, t);
  close_source(m);
  return m;
}

TargetMemory Scorer::start_target() const {
  TargetMemory m;
  const int d = config_.embed_dim;
  m.keys.assign(layout_.target_stack.size(), RowBuffer(d));
  m.values.assign(layout_.target_stack.size(), RowBuffer(d));
  m.states = RowBuffer(d);
  append_target(m, Vocabulary::kBos);
  return m;
}

void Scorer::append_target(TargetMemory& m, TokenId token) const {
  if (token < 0 || token >= config_.target_vocab_size) usage_error("target token out of range");
  const nn::Params p = params_;
  const int position = m.states.rows();
  Mat h = embed(TokenSeq{token}, Side::Target, position);
  for (std::size_t l = 0; l < layout_.target_stack.size(); ++l) {
    h = incremental_block(h, layout_.target_stack[l], p, m.keys[l], m.values[l]);
  }
  m.states.append(h.row(0));
}

TargetMemory Scorer::encode_target_prefix(const TokenSeq& prefix_with_bos) const {
  if (prefix_with_bos.empty() || prefix_with_bos.front() != Vocabulary::kBos) {
    usage_error("target prefix must start with <s>");
  }
  TargetMemory m = start_target();
  for (std::size_t i = 1; i < prefix_with_bos.size(); ++i) append_target(m, prefix_with_bos[i]);
  return m;
}

RowVec Scorer::predict_log_probs(const SourceMemory& source, int read_count,
                                 const TargetMemory& target, int row) const {
  if (row < 0 || row >= target.length()) usage_error("target row out of range");
  const int visible = source.visible_rows(read_count);
  const nn::Params p = params_;
  const std::array<int, 1> vis{visible};
  Mat h = target.states.all().row(row);
  for (std::size_t l = 0; l < layout_.cross_stack.size(); ++l) {
    const auto& block = layout_.cross_stack[l];
    const Mat a = nn::layer_norm(h, block.attn_norm, p, nullptr);
    const Mat q = nn::linear(a, block.attn.query, p);
    const Mat ctx = nn::attend(q, source.cross_keys[l].head(visible),
                               source.cross_values[l].head(visible), vis, block.attn.heads, nullptr);
    h += nn::linear(ctx, block.attn.output, p);
    const Mat b = nn::layer_norm(h, block.ffn_norm, p, nullptr);
    h += nn::feed_forward(b, block.ffn, p, nullptr);
  }
  const Mat out = nn::layer_norm(h, layout_.decoder_norm, p, nullptr);
  return nn::log_softmax(nn::linear(out, layout_.output, p)).row(0);
}

void Scorer::validate_query(const PrefixQuery& q) const {
  const int J = static_cast<int>(q.source.size());
  if (J < 1) usage_error("empty source");
  if (q.read_count < 1 || q.read_count > J) {
    usage_error("read_count " + std::to_string(q.read_count) + " outside [1, " +
                std::to_string(J) + "]");
  }
  if (q.target_prefix.empty() || q.target_prefix.front() != Vocabulary::kBos) {
    usage_error("target prefix must start with <s>");
  }
}

Distribution Scorer::score_prefix(const PrefixQuery& query) const {
  validate_query(query);
  const SourceMemory source = encode_source(query.source);
  const TargetMemory target = encode_target_prefix(query.target_prefix);
  const RowVec logp = predict_log_probs(source, query.read_count, target, target.length() - 1);
  const RowVec prob = logp.array().exp();
  return Distribution(prob.data(), prob.data() + prob.size());
}

std::vector<Distribution> Scorer::score_prefix_batch(std::span<const PrefixQuery> queries) const {
  // Queries sharing a source share one encoder pass; those sharing a target
  // prefix share one target pass. Each row is computed independently, so
  // results equal score_prefix bit for bit.
  std::map<TokenSeq, SourceMemory> sources;
  std::map<TokenSeq, TargetMemory> targets;
  std::vector<Distribution> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    validate_query(q);
    auto s = sources.find(q.source);
    if (s == sources.end()) s = sources.emplace(q.source, encode_source(q.source)).first;
    auto t = targets.find(q.target_prefix);
    if (t == targets.end()) {
      t = targets.emplace(q.target_prefix, encode_target_prefix(q.target_prefix)).first;
    }
    const RowVec logp = predict_log_probs(s->second, q.read_count, t->second, t->second.length() - 1);
    const RowVec prob = logp.array().exp();
    out.emplace_back(prob.data(), prob.data() + prob.size());
  }
  return out;
}

TokenId Scorer::greedy_next_token(const PrefixQuery& query) const {
  return argmax_token(score_prefix(query));
}

std::vector<double> Scorer::token_embedding(Side side, TokenId token) const {
  const auto& ref = side == Side::Source ? layout_.source_embedding : layout_.target_embedding;
  if (token < 0 || token >= ref.rows) usage_error("token id " + std::to_string(token) + " out of range");
  const auto row = nn::view(nn::Params(params_), ref).row(token);
  return std::vector<double>(row.data(), row.data() + row.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_vocab(io::Writer& w, const Vocabulary& v) {
  w.pod<std::int32_t>(v.min_freq());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (const auto& t : v.tokens()) w.str(t);
}

Vocabulary read_vocab(io::Reader& r) {
  const auto min_freq = r.pod<std::int32_t>();
  const auto n = r.pod<std::uint32_t>();
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(r.str());
  return Vocabulary::from_tokens(std::move(tokens), min_freq);
}

}  // namespace

void Scorer::save(const std::filesystem::path& path) const {
  io::Writer w;
  w.pod<std::int32_t>(config_.encoder_layers);
  w.pod<std::int32_t>(config_.decoder_layers);
  w.pod<std::int32_t>(config_.heads);
  w.pod<std::int32_t>(config_.embed_dim);
  w.pod<std::int32_t>(config_.ffn_dim);
  w.pod<double>(config_.dropout);
  w.pod<double>(config_.label_smoothing);
  w.pod<std::int64_t>(metadata_.steps);
  w.str(metadata_.objective);
  write_vocab(w, source_vocab_);
  write_vocab(w, target_vocab_);
  w.doubles(params_);
  w.write_file(path, kScorerMagic, kScorerVersion);
}

Scorer Scorer::load(const std::filesystem::path& path) {
  io::Reader r(path, kScorerMagic, kScorerVersion);
  ModelConfig c;
  c.encoder_layers = r.pod<std::int32_t>();
  c.decoder_layers = r.pod<std::int32_t>();
  c.heads = r.pod<std::int32_t>();
  c.embed_dim = r.pod<std::int32_t>();
  c.ffn_dim = r.pod<std::int32_t>();
  c.dropout = r.pod<double>();
  c.label_smoothing = r.pod<double>();
  TrainingMetadata meta;
  meta.steps = r.pod<std::int64_t>();
  meta.objective = r.str();
  Vocabulary vs = read_vocab(r);
  Vocabulary vt = read_vocab(r);
  const std::vector<double> params = r.doubles();
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    r.corrupt(e.what());
  }
  Scorer s(c, std::move(vs), std::move(vt));
  if (params.size() != s.params_.size()) r.corrupt("parameter count does not match config");
  s.params_.assign(params.begin(), params.end());
  s.metadata_ = std::move(meta);
  return s;
}

}  // namespace bssimt
