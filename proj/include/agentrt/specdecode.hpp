#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrt/tokenizer.hpp"

namespace agentrt {

/// Position of the generator within the action grammar. DX..DZ are the
/// mouse fields, K1..K6 the key chunks.
enum class DecodePhase { DX, DY, DZ, K1, K2, K3, K4, K5, K6, Done };

struct DecodeStage {
  DecodePhase phase = DecodePhase::DX;
  int keys_in_chunk = 0;
  bool number_emitted = false;

  bool in_key_chunk() const {
    return phase >= DecodePhase::K1 && phase <= DecodePhase::K6;
  }
  /// 0 for the mouse component, 1..6 for key chunks.
  int chunk_index() const {
    if (phase <= DecodePhase::DZ) return 0;
    return static_cast<int>(phase) - static_cast<int>(DecodePhase::K1) + 1;
  }
};

class IllegalToken : public std::runtime_error {
 public:
  explicit IllegalToken(const std::string& what) : std::runtime_error(what) {}
};

/// The fixed delimiter that terminates the current stage: space for DX/DY,
/// semicolon for DZ and K1-K5, the action-end marker for K6.
inline ActionToken next_draft(const DecodeStage& stage) {
  switch (stage.phase) {
    case DecodePhase::DX:
    case DecodePhase::DY:
      return space_token();
    case DecodePhase::DZ:
    case DecodePhase::K1:
    case DecodePhase::K2:
    case DecodePhase::K3:
    case DecodePhase::K4:
    case DecodePhase::K5:
      return semicolon_token();
    case DecodePhase::K6:
      return action_end_token();
    case DecodePhase::Done:
      throw IllegalToken("no draft past action end");
  }
  throw IllegalToken("unreachable");
}

/// Advances the stage machine by one emitted token, enforcing grammar
/// legality. Delimiters advance the phase; key tokens bump keys_in_chunk.
inline DecodeStage advance_stage(DecodeStage stage, const ActionToken& tok) {
  auto illegal = [&](const char* why) -> DecodeStage {
    throw IllegalToken(std::string(why) + " (token '" + tok.text + "')");
  };
  switch (stage.phase) {
    case DecodePhase::DX:
    case DecodePhase::DY:
    case DecodePhase::DZ:
      if (tok.kind == TokenKind::Number) {
        if (stage.number_emitted) return illegal("second number in mouse field");
        stage.number_emitted = true;
        return stage;
      }
      if (tok.kind == TokenKind::Space &&
          (stage.phase == DecodePhase::DX || stage.phase == DecodePhase::DY)) {
        if (!stage.number_emitted) return illegal("delimiter before mouse value");
        stage.phase = stage.phase == DecodePhase::DX ? DecodePhase::DY
                                                     : DecodePhase::DZ;
        stage.number_emitted = false;
        return stage;
      }
      if (tok.kind == TokenKind::Semicolon && stage.phase == DecodePhase::DZ) {
        if (!stage.number_emitted) return illegal("delimiter before mouse value");
        stage.phase = DecodePhase::K1;
        stage.number_emitted = false;
        stage.keys_in_chunk = 0;
        return stage;
      }
      return illegal("token not valid in mouse component");
    case DecodePhase::K1:
    case DecodePhase::K2:
    case DecodePhase::K3:
    case DecodePhase::K4:
    case DecodePhase::K5:
      if (tok.kind == TokenKind::Key) {
        if (stage.keys_in_chunk >= kMaxKeysPerChunk) {
          return illegal("fifth key in a chunk");
        }
        ++stage.keys_in_chunk;
        return stage;
      }
      if (tok.kind == TokenKind::Semicolon) {
        stage.phase = static_cast<DecodePhase>(static_cast<int>(stage.phase) + 1);
        stage.keys_in_chunk = 0;
        return stage;
      }
      return illegal("token not valid in key chunk");
    case DecodePhase::K6:
      if (tok.kind == TokenKind::Key) {
        if (stage.keys_in_chunk >= kMaxKeysPerChunk) {
          return illegal("fifth key in a chunk");
        }
        ++stage.keys_in_chunk;
        return stage;
      }
      if (tok.kind == TokenKind::ActionEnd) {
        stage.phase = DecodePhase::Done;
        return stage;
      }
      return illegal("K6 must end with the action-end token");
    case DecodePhase::Done:
      return illegal("token past action end");
  }
  return illegal("unreachable");
}

struct ChunkTiming {
  int chunk_index = 0;   // 0 = mouse, 1..6 = key chunks
  int tokens = 0;        // tokens belonging to this chunk (incl. delimiter)
  int forward_steps = 0; // steps between this chunk's and the previous one's completion
  double done_at_ms = 0; // completion time at the given per-step latency
};

struct DecodeResult {
  int forward_steps = 0;
  int accepted_drafts = 0;
  std::vector<ActionToken> emitted;  // must equal the target stream
  std::array<ChunkTiming, 7> chunks{};
};

/// Simulates draft-token speculative decoding over a target token stream.
/// Each forward step emits one true token; the stage's delimiter draft is
/// accepted iff it equals the subsequent token, which is then emitted in
/// the same step. Rejection sampling reduces to exact-match acceptance
/// because the draft distribution is a point mass.
inline DecodeResult simulate_decode(const std::vector<ActionToken>& target,
                                    double latency_per_step_ms,
                                    int reasoning_token_count = 0) {
  DecodeResult r;
  for (int i = 0; i < 7; ++i) r.chunks[static_cast<std::size_t>(i)].chunk_index = i;

  // Reasoning tokens are opaque: one step each, no drafting.
  r.forward_steps += reasoning_token_count;

  DecodeStage stage;
  std::size_t i = 0;
  int last_completed_steps = r.forward_steps;
  auto complete_chunk = [&](int idx, int steps_now) {
    auto& c = r.chunks[static_cast<std::size_t>(idx)];
    c.forward_steps = steps_now - last_completed_steps;
    c.done_at_ms = steps_now * latency_per_step_ms;
    last_completed_steps = steps_now;
  };

  while (i < target.size()) {
    ++r.forward_steps;
    int chunk_before = stage.chunk_index();
    stage = advance_stage(stage, target[i]);
    r.emitted.push_back(target[i]);
    r.chunks[static_cast<std::size_t>(chunk_before)].tokens++;
    if (stage.chunk_index() != chunk_before || stage.phase == DecodePhase::Done) {
      complete_chunk(chunk_before, r.forward_steps);
    }
    ++i;
    if (i < target.size() && stage.phase != DecodePhase::Done) {
      ActionToken draft = next_draft(stage);
      if (draft == target[i]) {
        ++r.accepted_drafts;
        int before = stage.chunk_index();
        stage = advance_stage(stage, target[i]);
        r.emitted.push_back(target[i]);
        r.chunks[static_cast<std::size_t>(before)].tokens++;
        if (stage.chunk_index() != before || stage.phase == DecodePhase::Done) {
          complete_chunk(before, r.forward_steps);
        }
        ++i;
      }
    }
  }
  return r;
}

struct CorpusStats {
  double mean_tokens_per_chunk = 0;
  double mean_steps_per_chunk = 0;
  double savings_ratio = 0;  // total forward steps / total tokens
};

inline nlohmann::json corpus_stats_json(const CorpusStats& s) {
  return {{"mean_tokens_per_chunk", s.mean_tokens_per_chunk},
          {"mean_steps_per_chunk", s.mean_steps_per_chunk},
          {"savings_ratio", s.savings_ratio}};
}

/// Aggregates decode statistics over a corpus of actions. Per-chunk means
/// cover the six key chunks of each action; the savings ratio covers the
/// whole token stream.
inline CorpusStats corpus_stats(const std::vector<ActionSequence>& corpus) {
  CorpusStats s;
  long total_tokens = 0, total_steps = 0;
  long chunk_tokens = 0, chunk_steps = 0, chunk_count = 0;
  for (const ActionSequence& a : corpus) {
    DecodeResult r = simulate_decode(tokenize_action(a), 1.0);
    total_tokens += static_cast<long>(r.emitted.size());
    total_steps += r.forward_steps;
    for (int k = 1; k <= kChunksPerAction; ++k) {
      chunk_tokens += r.chunks[static_cast<std::size_t>(k)].tokens;
      chunk_steps += r.chunks[static_cast<std::size_t>(k)].forward_steps;
      ++chunk_count;
    }
  }
  if (chunk_count > 0) {
    s.mean_tokens_per_chunk = static_cast<double>(chunk_tokens) / chunk_count;
    s.mean_steps_per_chunk = static_cast<double>(chunk_steps) / chunk_count;
  }
  if (total_tokens > 0) {
    s.savings_ratio = static_cast<double>(total_steps) / total_tokens;
  }
  return s;
}

}  // namespace agentrt
