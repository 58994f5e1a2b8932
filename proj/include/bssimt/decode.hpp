#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bssimt/actions.hpp"
#include "bssimt/model.hpp"

namespace bssimt {

/// What the policy sees before each step. last_source is the most recently
/// read source token, or the end-of-source id once the whole source has been
/// read. last_target is the latest emitted token, <s> before any output.
struct TranslationStatus {
  TokenId last_source = Vocabulary::kBos;
  TokenId last_target = Vocabulary::kBos;
  Action last_action = Action::Read;

  friend bool operator==(const TranslationStatus&, const TranslationStatus&) = default;
};

struct DecodeResult {
  TokenSeq hypothesis;  // end-of-sentence excluded
  Policy realized_policy;
  ActionSequence action_log;  // executed READs and WRITEs, final end-of-sentence write excluded
  bool hit_length_cap = false;
};

/// Chooses between READ and WRITE while source tokens remain unread.
class DecodeDriver {
 public:
  virtual ~DecodeDriver() = default;
  /// `read` source tokens and `written` target tokens so far.
  virtual Action decide(const TranslationStatus& status, int read, int written) = 0;
};

/// Follows a read-count policy; positions past its end wait for the whole source.
class PolicyDriver final : public DecodeDriver {
 public:
  explicit PolicyDriver(Policy policy) : policy_(std::move(policy)) {}
  Action decide(const TranslationStatus& status, int read, int written) override;

 private:
  Policy policy_;
};

/// Replays a stored action sequence (steps after the first), then READs.
class ReplayDriver final : public DecodeDriver {
 public:
  explicit ReplayDriver(ActionSequence actions) : actions_(std::move(actions)) {}
  Action decide(const TranslationStatus& status, int read, int written) override;

 private:
  ActionSequence actions_;
  std::size_t next_ = 1;
};

int length_cap(int source_length);  // 2 J + 10

/// Streaming greedy decoding. The first action is a READ; afterwards the
/// driver is consulted until the source is exhausted, from which point every
/// step WRITEs. Stops at end-of-sentence or after length_cap tokens.
DecodeResult simultaneous_decode(const Scorer& scorer, const TokenSeq& source,
                                 DecodeDriver& driver);

DecodeResult oracle_decode(const Scorer& scorer, const Policy& policy, const TokenSeq& source);
DecodeResult waitk_decode(const Scorer& scorer, int k, const TokenSeq& source);
TokenSeq full_sentence_decode(const Scorer& scorer, const TokenSeq& source);

using DriverFactory = std::function<std::unique_ptr<DecodeDriver>(std::size_t index)>;

std::vector<DecodeResult> decode_corpus(const Scorer& scorer, const std::vector<TokenSeq>& sources,
                                        const DriverFactory& factory, int workers = 1);

}  // namespace bssimt
