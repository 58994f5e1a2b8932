#include "bssimt/decode.hpp"

#include "bssimt/error.hpp"
#include "bssimt/parallel.hpp"

namespace bssimt {

Action PolicyDriver::decide(const TranslationStatus&, int read, int written) {
  if (written >= policy_.length()) return Action::Read;
  return read >= policy_.reads[static_cast<std::size_t>(written)] ? Action::Write : Action::Read;
}

Action ReplayDriver::decide(const TranslationStatus&, int, int) {
  if (next_ >= actions_.size()) return Action::Read;
  return actions_[next_++];
}

int length_cap(int source_length) { return 2 * source_length + 10; }

DecodeResult simultaneous_decode(const Scorer& scorer, const TokenSeq& source,
                                 DecodeDriver& driver) {
  const int J = static_cast<int>(source.size());
  if (J < 1) usage_error("cannot decode an empty source");
  const int cap = length_cap(J);
  DecodeResult out;
  SourceMemory src = scorer.start_source();
  TargetMemory tgt = scorer.start_target();
  TranslationStatus status;

  auto read = [&] {
    const int j = src.tokens;
    scorer.append_source(src, source[static_cast<std::size_t>(j)]);
    if (src.tokens == J) scorer.close_source(src);
    status.last_source = src.tokens == J ? Vocabulary::kEos : source[static_cast<std::size_t>(j)];
    status.last_action = Action::Read;
    out.action_log.push_back(Action::Read);
  };

  read();
  for (;;) {
    const int written = static_cast<int>(out.hypothesis.size());
    const Action a = src.tokens == J ? Action::Write : driver.decide(status, src.tokens, written);
    if (a == Action::Read) {
      read();
      continue;
    }
    const TokenId y = argmax_token(scorer.predict_log_probs(src, src.tokens, tgt, tgt.length() - 1));
    if (y == Vocabulary::kEos) break;
    out.hypothesis.push_back(y);
    out.realized_policy.reads.push_back(src.tokens);
    out.action_log.push_back(Action::Write);
    status.last_target = y;
    status.last_action = Action::Write;
    if (static_cast<int>(out.hypothesis.size()) >= cap) {
      out.hit_length_cap = true;
      break;
    }
    scorer.append_target(tgt, y);
  }
  return out;
}

DecodeResult oracle_decode(const Scorer& scorer, const Policy& policy, const TokenSeq& source) {
  PolicyDriver driver(policy);
  return simultaneous_decode(scorer, source, driver);
}

DecodeResult waitk_decode(const Scorer& scorer, int k, const TokenSeq& source) {
  if (k < 1) usage_error("k must be at least 1");
  const int J = static_cast<int>(source.size());
  return oracle_decode(scorer, waitk_policy(k, length_cap(J), J), source);
}

TokenSeq full_sentence_decode(const Scorer& scorer, const TokenSeq& source) {
  const int J = static_cast<int>(source.size());
  return oracle_decode(scorer, full_sentence_policy(1, J), source).hypothesis;
}

std::vector<DecodeResult> decode_corpus(const Scorer& scorer, const std::vector<TokenSeq>& sources,
                                        const DriverFactory& factory, int workers) {
  std::vector<DecodeResult> out(sources.size());
  parallel_for(sources.size(), workers, [&](std::size_t k) {
    auto driver = factory(k);
    out[k] = simultaneous_decode(scorer, sources[k], *driver);
  });
  return out;
}

}  // namespace bssimt
