#include "bssimt/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "bssimt/error.hpp"
#include "bssimt/parallel.hpp"

namespace bssimt {

using nn::Mat;
using nn::RowVec;

namespace {

constexpr std::string_view kAgentMagic = "BSSIMTAG";
constexpr std::uint32_t kAgentVersion = 1;
constexpr std::size_t kShards = 4;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

struct Cell {
  RowVec z, i, f, g, o, c_prev, c, tanh_c, h;
  double logit = 0.0;
};

void lstm_forward(const RowVec& z, const RowVec& c_prev, const nn::Linear& lstm, nn::Params p,
                  int H, Cell& cell) {
  const RowVec gates = z * nn::view(p, lstm.weight) + nn::view(p, lstm.bias).row(0);
  cell.z = z;
  cell.c_prev = c_prev;
  cell.i = gates.segment(0, H).unaryExpr(&sigmoid);
  cell.f = gates.segment(H, H).unaryExpr(&sigmoid);
  cell.g = gates.segment(2 * H, H).array().tanh();
  cell.o = gates.segment(3 * H, H).unaryExpr(&sigmoid);
  cell.c = cell.f.cwiseProduct(c_prev) + cell.i.cwiseProduct(cell.g);
  cell.tanh_c = cell.c.array().tanh();
  cell.h = cell.o.cwiseProduct(cell.tanh_c);
}

}  // namespace

void AgentConfig::validate() const {
  if (hidden_dim < 1 || action_embed_dim < 1 || status_projection_dim < 1) {
    usage_error("agent dimensions must be positive");
  }
}

StatusEmbeddings StatusEmbeddings::from(const Scorer& scorer) {
  const int D = scorer.config().embed_dim;
  auto table = [&](Side side, int rows) {
    Mat m(rows, D);
    for (int t = 0; t < rows; ++t) {
      const auto e = scorer.token_embedding(side, t);
      m.row(t) = Eigen::Map<const RowVec>(e.data(), D);
    }
    return m;
  };
  return {table(Side::Source, scorer.config().source_vocab_size),
          table(Side::Target, scorer.config().target_vocab_size)};
}

Agent::Agent(AgentConfig config, int embed_dim) : config_(config), embed_dim_(embed_dim) {
  config_.validate();
  if (embed_dim_ < 1) usage_error("embedding dimension must be positive");
  build_layout();
}

Agent::Agent(AgentConfig config, int embed_dim, std::uint64_t seed) : Agent(config, embed_dim) {
  Rng rng = Rng::substream(seed, "agent-init");
  nn::Grads p = params_;
  layout_.token_projection.init(p, rng);
  auto emb = nn::view(p, layout_.action_embedding);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = rng.normal(0.0, 1.0);
  layout_.action_projection.init(p, rng);
  layout_.lstm.init(p, rng);
  const int H = config_.hidden_dim;
  nn::view(p, layout_.lstm.bias).row(0).segment(H, H).setOnes();
  layout_.output.init(p, rng);
}

void Agent::build_layout() {
  nn::ParamLayout lay;
  const int P = config_.status_projection_dim, H = config_.hidden_dim;
  layout_.token_projection.declare(lay, 2 * embed_dim_, P);
  layout_.action_embedding = lay.add(2, config_.action_embed_dim);
  layout_.action_projection.declare(lay, config_.action_embed_dim, P);
  layout_.lstm.declare(lay, 2 * P + H, 4 * H);
  layout_.output.declare(lay, H, 1);
  params_.assign(lay.size(), 0.0);
}

AgentState Agent::initial_state() const {
  return {RowVec::Zero(config_.hidden_dim), RowVec::Zero(config_.hidden_dim)};
}

Mat Agent::token_inputs(const StatusEmbeddings& e,
                        const std::vector<TranslationStatus>& statuses) const {
  if (e.dim() != embed_dim_ || e.target.cols() != embed_dim_) {
    usage_error("agent expects " + std::to_string(embed_dim_) + "-dimensional embeddings, got " +
                std::to_string(e.dim()));
  }
  Mat x(static_cast<Eigen::Index>(statuses.size()), 2 * embed_dim_);
  for (std::size_t t = 0; t < statuses.size(); ++t) {
    const auto& s = statuses[t];
    if (s.last_source < 0 || s.last_source >= e.source.rows() || s.last_target < 0 ||
        s.last_target >= e.target.rows()) {
      usage_error("status token out of range");
    }
    const auto r = static_cast<Eigen::Index>(t);
    x.row(r).head(embed_dim_) = e.source.row(s.last_source);
    x.row(r).tail(embed_dim_) = e.target.row(s.last_target);
  }
  return x;
}

double Agent::step(const StatusEmbeddings& e, AgentState& state,
                   const TranslationStatus& status) const {
  const nn::Params p = params_;
  const int P = config_.status_projection_dim, H = config_.hidden_dim;
  const Mat x = token_inputs(e, {status});
  RowVec z(2 * P + H);
  z.head(P) = nn::linear(x, layout_.token_projection, p).row(0);
  const Mat a = nn::view(p, layout_.action_embedding).row(static_cast<int>(status.last_action));
  z.segment(P, P) = nn::linear(a, layout_.action_projection, p).row(0);
  z.tail(H) = state.h;
  Cell cell;
  lstm_forward(z, state.c, layout_.lstm, p, H, cell);
  state.h = cell.h;
  state.c = cell.c;
  return sigmoid(nn::linear(cell.h, layout_.output, p)(0, 0));
}

Action Agent::decide(const StatusEmbeddings& e, AgentState& state, const TranslationStatus& status,
                     double threshold) const {
  if (!(threshold > 0.0) || threshold > 1.0) usage_error("threshold must lie in (0, 1]");
  return step(e, state, status) >= threshold ? Action::Write : Action::Read;
}

Agent::EpisodeResult Agent::run_episode(const StatusEmbeddings& e, const AgentEpisode& episode,
                                        double weight, nn::Grads grad) const {
  const std::size_t n = episode.statuses.size();
  if (episode.labels.size() != n + 1) usage_error("episode has mismatched statuses and labels");
  const nn::Params p = params_;
  const int P = config_.status_projection_dim, H = config_.hidden_dim;
  const auto N = static_cast<Eigen::Index>(n);

  const Mat x = token_inputs(e, episode.statuses);
  const Mat u = nn::linear(x, layout_.token_projection, p);
  Mat a(N, config_.action_embed_dim);
  for (std::size_t t = 0; t < n; ++t) {
    a.row(static_cast<Eigen::Index>(t)) =
        nn::view(p, layout_.action_embedding).row(static_cast<int>(episode.statuses[t].last_action));
  }
  const Mat v = nn::linear(a, layout_.action_projection, p);

  std::vector<Cell> cells(n);
  RowVec h = RowVec::Zero(H), c = RowVec::Zero(H);
  EpisodeResult result;
  result.steps = static_cast<int>(n);
  const auto wo = nn::view(p, layout_.output.weight);
  const double bo = nn::view(p, layout_.output.bias)(0, 0);
  std::vector<double> dlogit(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    RowVec z(2 * P + H);
    z << u.row(r), v.row(r), h;
    lstm_forward(z, c, layout_.lstm, p, H, cells[t]);
    h = cells[t].h;
    c = cells[t].c;
    const double logit = h.dot(wo.col(0)) + bo;
    const double y = episode.labels[t + 1] == Action::Write ? 1.0 : 0.0;
    result.loss += softplus(logit) - y * logit;
    if ((sigmoid(logit) >= 0.5) == (y == 1.0)) ++result.correct;
    dlogit[t] = (sigmoid(logit) - y) * weight;
  }
  if (grad.empty()) return result;
  if (grad.size() != params_.size()) usage_error("gradient buffer size mismatch");

  auto gwo = nn::view(grad, layout_.output.weight);
  auto gbo = nn::view(grad, layout_.output.bias);
  auto gw = nn::view(grad, layout_.lstm.weight);
  auto gb = nn::view(grad, layout_.lstm.bias);
  const auto wl = nn::view(p, layout_.lstm.weight);
  Mat du(N, P), dv(N, P);
  RowVec dh_next = RowVec::Zero(H), dc_next = RowVec::Zero(H);
  RowVec dgates(4 * H);
  for (std::size_t t = n; t-- > 0;) {
    const Cell& cl = cells[t];
    gwo.col(0) += cl.h.transpose() * dlogit[t];
    gbo(0, 0) += dlogit[t];
    const RowVec dh = wo.col(0).transpose() * dlogit[t] + dh_next;
    const RowVec dc =
        dh.cwiseProduct(cl.o).cwiseProduct((1.0 - cl.tanh_c.array().square()).matrix()) + dc_next;
    dgates.segment(0, H) = dc.cwiseProduct(cl.g).cwiseProduct(cl.i.cwiseProduct((1.0 - cl.i.array()).matrix()));
    dgates.segment(H, H) =
        dc.cwiseProduct(cl.c_prev).cwiseProduct(cl.f.cwiseProduct((1.0 - cl.f.array()).matrix()));
    dgates.segment(2 * H, H) =
        dc.cwiseProduct(cl.i).cwiseProduct((1.0 - cl.g.array().square()).matrix());
    dgates.segment(3 * H, H) =
        dh.cwiseProduct(cl.tanh_c).cwiseProduct(cl.o.cwiseProduct((1.0 - cl.o.array()).matrix()));
    dc_next = dc.cwiseProduct(cl.f);
    gw.noalias() += cl.z.transpose() * dgates;
    gb.row(0) += dgates;
    const RowVec dz = dgates * wl.transpose();
    const auto r = static_cast<Eigen::Index>(t);
    du.row(r) = dz.head(P);
    dv.row(r) = dz.segment(P, P);
    dh_next = dz.tail(H);
  }
  nn::linear_backward(x, du, layout_.token_projection, p, grad);
  const Mat da = nn::linear_backward(a, dv, layout_.action_projection, p, grad);
  auto gemb = nn::view(grad, layout_.action_embedding);
  for (std::size_t t = 0; t < n; ++t) {
    gemb.row(static_cast<int>(episode.statuses[t].last_action)) += da.row(static_cast<Eigen::Index>(t));
  }
  return result;
}

void Agent::save(const std::filesystem::path& path) const {
  io::Writer w;
  w.pod<std::int32_t>(config_.hidden_dim);
  w.pod<std::int32_t>(config_.action_embed_dim);
  w.pod<std::int32_t>(config_.status_projection_dim);
  w.pod<std::int32_t>(embed_dim_);
  w.doubles(params_);
  w.write_file(path, kAgentMagic, kAgentVersion);
}

Agent Agent::load(const std::filesystem::path& path) {
  io::Reader r(path, kAgentMagic, kAgentVersion);
  AgentConfig c;
  c.hidden_dim = r.pod<std::int32_t>();
  c.action_embed_dim = r.pod<std::int32_t>();
  c.status_projection_dim = r.pod<std::int32_t>();
  const int embed_dim = r.pod<std::int32_t>();
  const std::vector<double> params = r.doubles();
  r.finish();
  if (embed_dim < 1) r.corrupt("bad embedding dimension");
  try {
    c.validate();
  } catch (const Error& e) {
    r.corrupt(e.what());
  }
  Agent a(c, embed_dim);
  if (params.size() != a.params_.size()) r.corrupt("parameter count does not match config");
  a.params_.assign(params.begin(), params.end());
  return a;
}

std::vector<AgentEpisode> make_training_episodes(const Scorer& scorer,
                                                 const std::vector<SentencePair>& pairs,
                                                 const std::vector<Policy>& policies,
                                                 StatusMode mode, int workers) {
  if (pairs.size() != policies.size()) usage_error("pair and policy counts differ");
  std::vector<AgentEpisode> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t k) {
    const auto& pair = pairs[k];
    const int J = pair.source_length();
    if (policies[k].length() != pair.target_length()) {
      usage_error("policy " + std::to_string(k + 1) + " does not match the target length");
    }
    AgentEpisode ep;
    ep.labels = policy_to_actions(policies[k], J);
    const SourceMemory src = scorer.encode_source(pair.source);
    TargetMemory tgt = scorer.start_target();
    int j = 1, i = 0;
    TranslationStatus status;
    status.last_source = J == 1 ? Vocabulary::kEos : pair.source[0];
    for (std::size_t t = 1; t < ep.labels.size(); ++t) {
      ep.statuses.push_back(status);
      const Action a = ep.labels[t];
      if (a == Action::Read) {
        ++j;
        status.last_source = j == J ? Vocabulary::kEos : pair.source[static_cast<std::size_t>(j - 1)];
      } else {
        TokenId y = pair.target[static_cast<std::size_t>(i)];
        if (mode == StatusMode::Generated) {
          y = argmax_token(scorer.predict_log_probs(src, j, tgt, i));
          scorer.append_target(tgt, y);
        }
        ++i;
        status.last_target = y;
      }
      status.last_action = a;
    }
    out[k] = std::move(ep);
  });
  return out;
}

TrainReport train_agent(Agent& agent, const StatusEmbeddings& embeddings,
                        const std::vector<AgentEpisode>& episodes, const TrainSchedule& schedule) {
  schedule.validate();
  if (episodes.empty()) usage_error("no training episodes");
  const std::size_t n = episodes.size();
  const std::size_t size = agent.parameter_count();
  AdamOptimizer opt(size, schedule);
  std::vector<nn::Buffer> shard_grads(kShards, nn::Buffer(size));
  std::vector<double> shard_loss(kShards);
  nn::Buffer grad(size);
  TrainReport report;
  std::int64_t step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < schedule.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = Rng::substream(schedule.seed, "agent-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    double epoch_loss = 0.0;
    long epoch_steps = 0;
    for (std::size_t begin = 0; begin < n && !stop; begin += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(schedule.batch_size));
      const std::size_t count = end - begin;
      long decisions = 0;
      for (std::size_t b = begin; b < end; ++b) {
        decisions += static_cast<long>(episodes[order[b]].statuses.size());
      }
      if (decisions == 0) continue;
      const double weight = 1.0 / static_cast<double>(decisions);
      parallel_for(kShards, schedule.workers, [&](std::size_t s) {
        auto& g = shard_grads[s];
        std::fill(g.begin(), g.end(), 0.0);
        double loss = 0.0;
        for (std::size_t b = count * s / kShards; b < count * (s + 1) / kShards; ++b) {
          loss += agent.run_episode(embeddings, episodes[order[begin + b]], weight, g).loss;
        }
        shard_loss[s] = loss;
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < kShards; ++s) {
        batch_loss += shard_loss[s];
        for (std::size_t i = 0; i < size; ++i) grad[i] += shard_grads[s][i];
      }
      if (!std::isfinite(batch_loss)) {
        numeric_error("non-finite agent loss at step " + std::to_string(step + 1));
      }
      clip_gradient(grad, schedule.clip_norm);
      opt.step(agent.mutable_parameters(), grad);
      ++step;
      epoch_loss += batch_loss;
      epoch_steps += decisions;
      if (schedule.max_steps > 0 && step >= schedule.max_steps) stop = true;
    }
    report.epoch_loss.push_back(epoch_steps == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_steps));
  }
  report.steps = step;
  report.final_loss = report.epoch_loss.back();
  return report;
}

double action_accuracy(const Agent& agent, const StatusEmbeddings& embeddings,
                       const std::vector<AgentEpisode>& episodes, int workers) {
  std::vector<int> correct(episodes.size()), total(episodes.size());
  parallel_for(episodes.size(), workers, [&](std::size_t k) {
    const auto r = agent.run_episode(embeddings, episodes[k], 1.0, {});
    correct[k] = r.correct;
    total[k] = r.steps;
  });
  const long t = std::accumulate(total.begin(), total.end(), 0L);
  if (t == 0) usage_error("no decisions to score");
  return static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0L)) /
         static_cast<double>(t);
}

AgentDriver::AgentDriver(const Agent& agent, const StatusEmbeddings& embeddings, double threshold)
    : agent_(agent), embeddings_(embeddings), threshold_(threshold), state_(agent.initial_state()) {
  if (!(threshold > 0.0) || threshold > 1.0) usage_error("threshold must lie in (0, 1]");
}

Action AgentDriver::decide(const TranslationStatus& status, int, int) {
  return agent_.decide(embeddings_, state_, status, threshold_);
}

}  // namespace bssimt
