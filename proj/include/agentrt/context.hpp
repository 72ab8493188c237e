#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrt/action.hpp"
#include "agentrt/tokenizer.hpp"

namespace agentrt {

inline constexpr int kHistoryWindowCapacity = 20;
inline constexpr int kForceThinkThreshold = 100;  // strict greater-than
inline constexpr int kImageTokenCount = 1196;

class ThinkingTurnRejected : public std::logic_error {
 public:
  ThinkingTurnRejected()
      : std::logic_error("thinking turns must go through flush_on_reasoning") {}
};

class NonThinkingTurnRejected : public std::logic_error {
 public:
  NonThinkingTurnRejected()
      : std::logic_error("flush_on_reasoning requires a thinking turn") {}
};

struct ContextEntry {
  std::uint64_t step = 0;
  std::string frame;  // opaque observation reference
  ModelTurn turn;
  int token_count = 0;  // image tokens + turn tokens, supplied at push
  int span_start = 0;   // absolute token offset in the cache layout
};

/// Token span [start, start + length) in the assembled context.
struct TokenSpan {
  int start = 0;
  int length = 0;

  int end() const { return start + length; }
  bool overlaps(const TokenSpan& o) const {
    return start < o.end() && o.start < end();
  }
};

struct CachePlan {
  int reused_prefix_len = 0;
  std::vector<TokenSpan> dropped_spans;
  TokenSpan sink_anchor;  // system-prompt tokens, pinned forever
};

/// Sliding inference context: system prompt, the most recent reasoning, and
/// a bounded FIFO of frame/turn pairs. Single-writer.
class ContextWindow {
 public:
  ContextWindow(std::string system_prompt, int capacity,
                std::string initial_instruction = {},
                int system_prompt_tokens = 0, int image_tokens = kImageTokenCount)
      : system_prompt_(std::move(system_prompt)),
        capacity_(capacity),
        sink_tokens_(system_prompt_tokens > 0
                         ? system_prompt_tokens
                         : static_cast<int>(system_prompt_.size())),
        image_tokens_(image_tokens) {
    if (capacity_ <= 0) throw std::invalid_argument("capacity must be positive");
    layout_end_ = sink_tokens_;
    // The initial instruction behaves as a synthetic first reasoning that
    // later reasonings override.
    if (!initial_instruction.empty()) latest_reasoning_ = std::move(initial_instruction);
  }

  /// Appends a non-thinking step; evicts the oldest entry when over
  /// capacity. Returns the evicted entries (0 or 1).
  std::vector<ContextEntry> push_step(const std::string& frame,
                                      const ModelTurn& turn,
                                      std::optional<int> token_count = std::nullopt) {
    if (turn.thinking()) throw ThinkingTurnRejected();
    std::vector<ContextEntry> evicted;
    append(frame, turn, token_count);
    while (static_cast<int>(entries_.size()) > capacity_) {
      evicted.push_back(entries_.front());
      entries_.erase(entries_.begin());
      ++evicted_count_;
    }
    ++steps_since_reasoning_;
    return evicted;
  }

  /// A thinking turn clears the FIFO and re-accumulates from this step: the
  /// triggering frame/turn becomes entry #1 of the fresh window.
  /// Returns the cache plan for the flush: only the sink survives.
  CachePlan flush_on_reasoning(const std::string& frame, const ModelTurn& turn,
                               std::optional<int> token_count = std::nullopt) {
    if (!turn.thinking()) throw NonThinkingTurnRejected();
    flushed_count_ += static_cast<std::uint64_t>(entries_.size());
    CachePlan plan;
    plan.sink_anchor = {0, sink_tokens_};
    plan.reused_prefix_len = sink_tokens_;
    if (layout_end_ > sink_tokens_) {
      plan.dropped_spans.push_back({sink_tokens_, layout_end_ - sink_tokens_});
    }
    entries_.clear();
    layout_end_ = sink_tokens_;
    latest_reasoning_ = turn.reasoning;
    steps_since_reasoning_ = 0;
    append(frame, turn, token_count);
    return plan;
  }

  /// True when no reasoning has been produced for more than 100 steps.
  bool force_think_check() const {
    return steps_since_reasoning_ > kForceThinkThreshold;
  }

  /// Deterministic dialogue serialization: system prompt, latest reasoning,
  /// then entries in step order as user-image / assistant-turn exchanges.
  std::string assemble_prompt() const {
    std::string out = "<|system|>" + system_prompt_ + "\n";
    if (latest_reasoning_) {
      out += "<|reasoning|>" + *latest_reasoning_ + "\n";
    }
    for (const ContextEntry& e : entries_) {
      out += "<|user|><image:" + e.frame + ">\n";
      out += "<|assistant|>" + serialize_turn(e.turn) + "\n";
    }
    return out;
  }

  /// StreamingLLM-style cache accounting for the latest push. The system
  /// prompt is the pinned sink; dropped spans cover exactly the evicted
  /// entries; reused_prefix_len counts the sink plus surviving entries.
  CachePlan plan_cache(const std::vector<ContextEntry>& evictions) const {
    CachePlan plan;
    plan.sink_anchor = {0, sink_tokens_};
    plan.reused_prefix_len = sink_tokens_;
    for (const ContextEntry& e : entries_) plan.reused_prefix_len += e.token_count;
    for (const ContextEntry& e : evictions) {
      plan.dropped_spans.push_back({e.span_start, e.token_count});
    }
    return plan;
  }

  nlohmann::json snapshot() const {
    nlohmann::json j;
    j["system_prompt"] = system_prompt_;
    j["capacity"] = capacity_;
    j["steps_since_reasoning"] = steps_since_reasoning_;
    if (latest_reasoning_) j["latest_reasoning"] = *latest_reasoning_;
    j["entries"] = nlohmann::json::array();
    for (const ContextEntry& e : entries_) {
      j["entries"].push_back({{"step", e.step},
                              {"frame", e.frame},
                              {"turn", serialize_turn(e.turn)},
                              {"token_count", e.token_count}});
    }
    return j;
  }

  const std::vector<ContextEntry>& entries() const { return entries_; }
  const std::optional<std::string>& latest_reasoning() const {
    return latest_reasoning_;
  }
  int capacity() const { return capacity_; }
  int steps_since_reasoning() const { return steps_since_reasoning_; }
  std::uint64_t pushed_count() const { return pushed_count_; }
  std::uint64_t evicted_count() const { return evicted_count_; }
  std::uint64_t flushed_count() const { return flushed_count_; }
  int sink_tokens() const { return sink_tokens_; }

 private:
  void append(const std::string& frame, const ModelTurn& turn,
              std::optional<int> token_count) {
    ContextEntry e;
    e.step = next_step_++;
    e.frame = frame;
    e.turn = turn;
    e.token_count =
        token_count.value_or(image_tokens_ + static_cast<int>(token_count_of(turn)));
    e.span_start = layout_end_;
    layout_end_ += e.token_count;
    entries_.push_back(e);
    ++pushed_count_;
  }

  static std::size_t token_count_of(const ModelTurn& turn) {
    std::size_t n = token_count(turn.action);
    if (turn.thinking()) n += turn.reasoning.size();  // opaque reasoning length
    return n;
  }

  std::string system_prompt_;
  int capacity_;
  int sink_tokens_;
  int image_tokens_;
  std::optional<std::string> latest_reasoning_;
  std::vector<ContextEntry> entries_;
  int steps_since_reasoning_ = 0;
  std::uint64_t next_step_ = 0;
  std::uint64_t pushed_count_ = 0;
  std::uint64_t evicted_count_ = 0;
  std::uint64_t flushed_count_ = 0;
  int layout_end_ = 0;
};

}  // namespace agentrt
